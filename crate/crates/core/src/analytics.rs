//! Score statistics and the difficulty-label audit.

use std::collections::HashMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::event::{QuestionMeta, Session};
use crate::{Error, Result};

pub const DEFAULT_K_SIGMA: f64 = 2.0;

fn check_pair(xs: &[f64], ys: &[f64], min_n: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "length mismatch: {} vs {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < min_n {
        return Err(Error::precondition(format!(
            "correlation needs at least {min_n} points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("correlation input contains non-finite values"));
    }
    Ok(())
}

fn centered_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        let (dx, dy) = (x - mx, y - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::precondition("correlation undefined for zero variance"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// Sample Pearson correlation. Needs at least 3 points and nonzero
/// variance on both sides.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 3)?;
    centered_correlation(xs, ys)
}

/// 1-based ranks; tied values share the mean of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // ranks start+1 ..= end
        let rank = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = rank;
        }
        start = end;
    }
    ranks
}

/// Spearman rank correlation with tie-averaged ranks.
pub fn spearman(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 3)?;
    centered_correlation(&average_ranks(xs), &average_ranks(ys))
}

/// Spearman on as few as two points; used for ROI ordering where two
/// regions already define a direction.
pub(crate) fn rank_correlation(xs: &[f64], ys: &[f64]) -> Result<f64> {
    check_pair(xs, ys, 2)?;
    centered_correlation(&average_ranks(xs), &average_ranks(ys))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionStats {
    pub question_id: String,
    pub difficulty_label: u32,
    pub n_sessions: usize,
    /// Sessions with an outcome.
    pub n_scored: usize,
    /// Mean of `outcome / max_score` (each clamped to [0,1]) over scored
    /// sessions.
    pub mean_score_norm: Option<f64>,
}

/// Per-question statistics in metadata order. Sessions for questions not
/// in `metas` are ignored.
pub fn question_stats(sessions: &[Session], metas: &[QuestionMeta]) -> Vec<QuestionStats> {
    let mut acc: HashMap<&str, (usize, usize, f64)> = HashMap::new();
    let max_scores: HashMap<&str, f64> = metas
        .iter()
        .map(|m| (m.question_id.as_str(), m.max_score))
        .collect();
    for s in sessions {
        let Some(&max) = max_scores.get(s.question_id.as_str()) else {
            continue;
        };
        let e = acc.entry(s.question_id.as_str()).or_default();
        e.0 += 1;
        if let Some(norm) = s.normalized_score(max) {
            e.1 += 1;
            e.2 += norm.clamp(0.0, 1.0);
        }
    }
    metas
        .iter()
        .map(|m| {
            let (n, scored, sum) = acc.get(m.question_id.as_str()).copied().unwrap_or_default();
            QuestionStats {
                question_id: m.question_id.clone(),
                difficulty_label: m.difficulty_label,
                n_sessions: n,
                n_scored: scored,
                mean_score_norm: (scored > 0).then(|| sum / scored as f64),
            }
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagDirection {
    /// Scored above what the label predicts.
    EasierThanLabeled,
    /// Scored below what the label predicts.
    HarderThanLabeled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedQuestion {
    pub question_id: String,
    pub residual: f64,
    pub direction: FlagDirection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRow {
    #[serde(flatten)]
    pub stats: QuestionStats,
    pub residual: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub pearson_r: f64,
    pub spearman_rho: f64,
    pub intercept: f64,
    pub slope: f64,
    pub residual_sigma: f64,
    pub k_sigma: f64,
    pub per_question: Vec<QuestionRow>,
    pub flagged: Vec<FlaggedQuestion>,
    /// Questions without any scored session; not part of the fit.
    pub excluded: Vec<String>,
}

impl CorrelationReport {
    /// One row per fitted question:
    /// `question_id,difficulty,n,mean_score,residual,flagged`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "question_id,difficulty,n,mean_score,residual,flagged")?;
        for row in &self.per_question {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                csv_field(&row.stats.question_id),
                row.stats.difficulty_label,
                row.stats.n_scored,
                row.stats.mean_score_norm.unwrap_or(f64::NAN),
                row.residual,
                row.flagged
            )?;
        }
        Ok(())
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Fits `mean_score = a + b * difficulty` by least squares and flags
/// questions whose residual exceeds `k_sigma` residual standard deviations.
pub fn difficulty_report(stats: &[QuestionStats], k_sigma: f64) -> Result<CorrelationReport> {
    if !(k_sigma >= 0.0) {
        return Err(Error::invalid(format!("k must be >= 0, got {k_sigma}")));
    }
    let (usable, excluded): (Vec<&QuestionStats>, Vec<&QuestionStats>) = stats
        .iter()
        .partition(|s| s.n_scored > 0 && s.mean_score_norm.is_some());
    if usable.len() < 3 {
        return Err(Error::precondition(format!(
            "difficulty report needs at least 3 scored questions, got {}",
            usable.len()
        )));
    }
    let xs: Vec<f64> = usable.iter().map(|s| s.difficulty_label as f64).collect();
    let ys: Vec<f64> = usable
        .iter()
        .map(|s| s.mean_score_norm.expect("usable"))
        .collect();
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::precondition("all difficulty labels are equal"));
    }

    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residuals: Vec<f64> = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| y - (intercept + slope * x))
        .collect();
    let sigma = (residuals.iter().map(|r| r * r).sum::<f64>() / n).sqrt();
    // residuals at rounding-noise level relative to the data are zero
    let y_scale = ys.iter().map(|y| (y - my).abs()).fold(0.0, f64::max).max(my.abs());
    let exact_fit = sigma <= 1e-12 * y_scale.max(f64::MIN_POSITIVE);

    let mut per_question = Vec::with_capacity(usable.len());
    let mut flagged = Vec::new();
    for (s, &r) in usable.iter().zip(&residuals) {
        let is_flagged = !exact_fit && r.abs() > k_sigma * sigma;
        if is_flagged {
            flagged.push(FlaggedQuestion {
                question_id: s.question_id.clone(),
                residual: r,
                direction: if r < 0.0 {
                    FlagDirection::HarderThanLabeled
                } else {
                    FlagDirection::EasierThanLabeled
                },
            });
        }
        per_question.push(QuestionRow {
            stats: (*s).clone(),
            residual: r,
            flagged: is_flagged,
        });
    }

    Ok(CorrelationReport {
        pearson_r: pearson(&xs, &ys)?,
        spearman_rho: spearman(&xs, &ys)?,
        intercept,
        slope,
        residual_sigma: sigma,
        k_sigma,
        per_question,
        flagged,
        excluded: excluded.iter().map(|s| s.question_id.clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stat(id: &str, label: u32, mean: f64) -> QuestionStats {
        QuestionStats {
            question_id: id.into(),
            difficulty_label: label,
            n_sessions: 10,
            n_scored: 10,
            mean_score_norm: Some(mean),
        }
    }

    #[test]
    fn pearson_identity_and_negation() {
        let xs = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!((pearson(&xs, &xs).unwrap() - 1.0).abs() < 1e-15);
        let ys: Vec<f64> = xs.iter().map(|x| -x + 7.0).collect();
        assert!((pearson(&xs, &ys).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn pearson_preconditions() {
        assert!(pearson(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(pearson(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(pearson(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(average_ranks(&[1.0, 1.0, 2.0]), vec![1.5, 1.5, 3.0]);
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 3.0]), vec![3.0, 1.0, 3.0, 3.0]);
    }

    #[test]
    fn spearman_monotone() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys = [0.1, 5.0, 5.5, 100.0];
        assert!((spearman(&xs, &ys).unwrap() - 1.0).abs() < 1e-15);
        let rev: Vec<f64> = ys.iter().rev().copied().collect();
        assert!((spearman(&xs, &rev).unwrap() + 1.0).abs() < 1e-15);
    }

    #[test]
    fn linear_scores_are_not_flagged() {
        let stats: Vec<_> = (1..=5)
            .map(|d| stat(&format!("q{d}"), d, 0.95 - 0.1 * d as f64))
            .collect();
        let r = difficulty_report(&stats, 2.0).unwrap();
        assert!(r.flagged.is_empty());
        assert!((r.slope + 0.1).abs() < 1e-12);
        assert!(r.per_question.iter().all(|q| q.residual.abs() < 1e-12));
    }

    #[test]
    fn too_few_questions() {
        let stats = vec![stat("a", 1, 0.9), stat("b", 2, 0.5)];
        assert!(matches!(
            difficulty_report(&stats, 2.0),
            Err(Error::FailedPrecondition(_))
        ));
    }

    #[test]
    fn equal_labels_rejected() {
        let stats = vec![stat("a", 2, 0.9), stat("b", 2, 0.5), stat("c", 2, 0.4)];
        assert!(difficulty_report(&stats, 2.0).is_err());
    }

    #[test]
    fn outlier_flagged_with_direction() {
        let mut stats: Vec<_> = (0..20)
            .map(|i| {
                let d = 1 + i % 5;
                let wobble = if i % 2 == 0 { 0.01 } else { -0.01 };
                stat(&format!("q{i}"), d, 0.95 - 0.1 * d as f64 + wobble)
            })
            .collect();
        stats.push(stat("easy_but_hard", 1, 0.35));
        let r = difficulty_report(&stats, 2.0).unwrap();
        assert_eq!(r.flagged.len(), 1);
        assert_eq!(r.flagged[0].question_id, "easy_but_hard");
        assert_eq!(r.flagged[0].direction, FlagDirection::HarderThanLabeled);
        assert!(difficulty_report(&stats, 1000.0).unwrap().flagged.is_empty());
    }

    #[test]
    fn zero_session_questions_excluded() {
        let mut stats: Vec<_> = (1..=4).map(|d| stat(&format!("q{d}"), d, 1.0 - 0.2 * d as f64)).collect();
        stats.push(QuestionStats {
            question_id: "empty".into(),
            difficulty_label: 3,
            n_sessions: 0,
            n_scored: 0,
            mean_score_norm: None,
        });
        let r = difficulty_report(&stats, 2.0).unwrap();
        assert_eq!(r.excluded, vec!["empty".to_string()]);
        assert_eq!(r.per_question.len(), 4);
    }

    #[test]
    fn csv_rows() {
        let stats: Vec<_> = (1..=3).map(|d| stat(&format!("q{d}"), d, 1.0 - 0.25 * d as f64)).collect();
        let r = difficulty_report(&stats, 2.0).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "question_id,difficulty,n,mean_score,residual,flagged");
        assert_eq!(lines.len(), 4);
        assert!(lines[1].starts_with("q1,1,10,0.75,"));
    }
}
