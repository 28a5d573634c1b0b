//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trailscope_client::Client;
use trailscope_core::analytics::{pearson, spearman};
use trailscope_core::event::{parse_event_log, write_event_log, Cohort};
use trailscope_core::heatmap::{accumulate_grid, smooth_grid};
use trailscope_core::pipeline::{Dataset, HeatmapParams, TransitionParams};
use trailscope_core::synthgen::{distance_to_path, gen_dataset, PatternKind};
use trailscope_core::transition::build_transition_map;
use trailscope_service::{router, AppState};
use trailscope_testkit::oracle::{enumerate_transitions, pearson_direct, spearman_bruteforce};
use trailscope_testkit::scenario::{
    labelled_sessions, mislabel_config, ordering_config, random_events, random_label_sequences,
    thinking_config, PLANTED_MISLABELS,
};

type Verdict = Result<String, String>;

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn ordering_recovery() -> Verdict {
    let start = Instant::now();
    let params = TransitionParams::default();
    let mut worst = (f64::INFINITY, f64::NEG_INFINITY);
    for seed in 0..10 {
        let ds = gen_dataset(&ordering_config(seed, 200, 0.02)).map_err(|e| e.to_string())?;
        let data = Dataset::from_events(ds.events, Some(ds.metas));
        let score = |cohort| -> Result<f64, String> {
            let map = data
                .transition_map("order", &params, cohort)
                .map_err(|e| e.to_string())?;
            map.export()
                .ordering_score
                .ok_or_else(|| format!("seed {seed}: ordering score undefined"))
        };
        let (lr, rl) = (score(Cohort::FullMarks)?, score(Cohort::Wrong)?);
        worst = (worst.0.min(lr), worst.1.max(rl));
        if !(lr >= 0.9 && rl <= -0.9) {
            return Err(format!("seed {seed}: LR {lr:.4}, RL {rl:.4}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    check(
        secs < 5.0,
        format!("min LR {:.4}, max RL {:.4}, 10 seeds in {secs:.2}s", worst.0, worst.1),
    )
}

fn mislabel_flagging() -> Verdict {
    let seeds = 20;
    let (mut recall_sum, mut false_pos) = (0.0, 0usize);
    for seed in 0..seeds {
        let ds = gen_dataset(&mislabel_config(seed, true)).map_err(|e| e.to_string())?;
        let report = Dataset::from_events(ds.events, Some(ds.metas))
            .correlation(2.0)
            .map_err(|e| e.to_string())?;
        let hits = report
            .flagged
            .iter()
            .filter(|f| PLANTED_MISLABELS.contains(&f.question_id.as_str()))
            .count();
        recall_sum += hits as f64 / PLANTED_MISLABELS.len() as f64;
        false_pos += report.flagged.len() - hits;
    }
    let recall = recall_sum / seeds as f64;
    let fp = false_pos as f64 / seeds as f64;
    check(
        recall >= 0.9 && fp <= 1.0,
        format!("recall {recall:.3}, false positives per seed {fp:.2} over {seeds} seeds"),
    )
}

fn thinking_asymmetry() -> Verdict {
    let horizontal = PatternKind::AdditiveHorizontal.preset_waypoints();
    let vertical = PatternKind::AdditiveVertical.preset_waypoints();
    let mut min_ratio = f64::INFINITY;
    for seed in 0..10 {
        let ds = gen_dataset(&thinking_config(seed, 160, 40)).map_err(|e| e.to_string())?;
        let heat = Dataset::from_events(ds.events, Some(ds.metas))
            .heatmap("area", &HeatmapParams::default())
            .map_err(|e| e.to_string())?
            .grid;
        let (mut h_mass, mut v_mass) = (0.0, 0.0);
        for j in 0..heat.height {
            for i in 0..heat.width {
                let (x, y) = heat.cell_center(i, j);
                let m = heat.get(i, j);
                if distance_to_path([x, y], &horizontal) <= 0.06 {
                    h_mass += m;
                }
                if distance_to_path([x, y], &vertical) <= 0.06 {
                    v_mass += m;
                }
            }
        }
        let ratio = h_mass / v_mass;
        min_ratio = min_ratio.min(ratio);
        if !(ratio >= 2.0) {
            return Err(format!("seed {seed}: ratio {ratio:.3}"));
        }
    }
    check(true, format!("min horizontal/vertical mass ratio {min_ratio:.3} over 10 seeds"))
}

fn conservation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst = 0.0f64;
    for set in 0..100 {
        let n = rng.random_range(1..2000);
        let res = rng.random_range(8..100);
        let events = random_events(rng.random(), n);
        let positional = events.iter().filter(|e| e.is_positional()).count() as f64;
        let raw = accumulate_grid(&events, res, res).map_err(|e| e.to_string())?;
        for sigma in [0.0, 0.5, 1.5, 4.0] {
            let g = smooth_grid(&raw, sigma).map_err(|e| e.to_string())?;
            for mass in [g.total_mass, g.sum()] {
                let rel = if positional == 0.0 { mass.abs() } else { (mass - positional).abs() / positional };
                worst = worst.max(rel);
                if rel > 1e-6 {
                    return Err(format!("set {set}, sigma {sigma}: mass {mass} vs {positional}"));
                }
            }
        }
    }
    check(true, format!("100 sets x 4 sigmas, worst relative error {worst:.2e}"))
}

fn roi_monotonicity() -> Verdict {
    let radii = [0.0, 0.02, 0.05, 0.1, 0.15, 0.25, 0.4, 1.5];
    let mut violations = 0;
    let mut spans = Vec::new();
    for seed in 0..20 {
        let data = Dataset::from_events(random_events(1000 + seed, 3000), None);
        let mut counts = Vec::new();
        for &r in &radii {
            let params = TransitionParams {
                roi_size: r,
                ..TransitionParams::default()
            };
            counts.push(data.rois("q", &params).map_err(|e| e.to_string())?.len());
        }
        violations += counts.windows(2).filter(|w| w[1] > w[0]).count();
        spans.push(format!("{}->{}", counts[0], counts[counts.len() - 1]));
    }
    check(
        violations == 0,
        format!("{violations} violations over 20 datasets x 8 radii (counts {})", spans.join(" ")),
    )
}

fn oracle_equivalence() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tested = 0;
    let mut worst = 0.0f64;
    while tested < 100 {
        let n = rng.random_range(3..50);
        let xs: Vec<f64> = (0..n).map(|_| rng.random_range(0..5) as f64).collect();
        let ys: Vec<f64> = (0..n).map(|_| (rng.random_range(0.0..10.0f64) * 2.0).round() / 2.0).collect();
        if xs.iter().all(|&x| x == xs[0]) || ys.iter().all(|&y| y == ys[0]) {
            continue;
        }
        tested += 1;
        let dp = (pearson(&xs, &ys).map_err(|e| e.to_string())? - pearson_direct(&xs, &ys)).abs();
        let ds = (spearman(&xs, &ys).map_err(|e| e.to_string())? - spearman_bruteforce(&xs, &ys)).abs();
        worst = worst.max(dp).max(ds);
        if dp > 1e-12 || ds > 1e-12 {
            return Err(format!("vector {tested}: pearson diff {dp:.2e}, spearman diff {ds:.2e}"));
        }
    }
    for trial in 0..500 {
        let seqs = random_label_sequences(&mut rng, 5, 10, 3);
        let (rois, sessions) = labelled_sessions(&seqs);
        let map = build_transition_map(&sessions, &rois, Cohort::All, 1.0, 1).map_err(|e| e.to_string())?;
        let got: BTreeMap<(usize, usize), usize> =
            map.edges.iter().map(|e| ((e.from_roi, e.to_roi), e.count)).collect();
        if got != enumerate_transitions(&seqs) {
            return Err(format!("transition trial {trial} differs: {seqs:?}"));
        }
    }
    check(
        true,
        format!("100 vectors, worst diff {worst:.2e}; 500 transition enumerations equal"),
    )
}

fn trailscope(args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_trailscope"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)));
    }
    Ok(out.stdout)
}

/// Runs every batch command into `dir` and returns (name, bytes) for each
/// output file and stdout.
fn cli_outputs(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let cfg_dir = dir.join("cfg");
    fs::create_dir_all(&cfg_dir).map_err(|e| e.to_string())?;
    let mut outputs = Vec::new();
    for (name, cfg) in [
        ("order", ordering_config(3, 30, 0.02)),
        ("labels", mislabel_config(3, true)),
        ("area", thinking_config(3, 40, 10)),
    ] {
        let config = cfg_dir.join(format!("{name}.json"));
        fs::write(&config, serde_json::to_vec(&cfg).unwrap()).map_err(|e| e.to_string())?;
        let (ev, meta) = (dir.join(format!("{name}.jsonl")), dir.join(format!("{name}.meta.json")));
        outputs.push((
            format!("generate {name}"),
            trailscope(&["generate", "--config", &s(&config), "--events", &s(&ev), "--meta", &s(&meta)])?,
        ));
        outputs.push((format!("validate {name}"), trailscope(&["validate", "--events", &s(&ev)])?));
    }
    let input = |name: &str| {
        [
            "--events".to_string(),
            s(&dir.join(format!("{name}.jsonl"))),
            "--meta".to_string(),
            s(&dir.join(format!("{name}.meta.json"))),
        ]
    };
    let mut run = |args: Vec<String>| -> Result<(), String> {
        let refs: Vec<&str> = args.iter().map(String::as_str).collect();
        outputs.push((args.join(" "), trailscope(&refs)?));
        Ok(())
    };
    let mut heat = vec!["heatmap".into(), "--question".into(), "area".into(), "--out".into(), s(&dir.join("heat"))];
    heat.extend(input("area"));
    run(heat)?;
    for cohort in ["full", "wrong"] {
        let mut t = vec![
            "transitions".into(), "--question".into(), "order".into(), "--cohort".into(), cohort.into(),
            "--out".into(), s(&dir.join(format!("trans_{cohort}"))),
        ];
        t.extend(input("order"));
        run(t)?;
    }
    let mut c = vec!["correlate".into(), "--out".into(), s(&dir.join("corr"))];
    c.extend(input("labels"));
    run(c)?;

    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_file())
        .collect();
    files.sort_by_key(|e| e.file_name());
    for f in files {
        outputs.push((
            f.file_name().to_string_lossy().into_owned(),
            fs::read(f.path()).map_err(|e| e.to_string())?,
        ));
    }
    Ok(outputs)
}

fn get_bodies(client: &Client, rt: &tokio::runtime::Runtime) -> Result<Vec<(String, Vec<u8>)>, String> {
    let tp = |cohort: &str| {
        vec![
            ("cohort", cohort.to_string()),
            ("roi_size", "0.05".to_string()),
        ]
    };
    let requests: Vec<(&str, Vec<(&str, String)>)> = vec![
        ("status", vec![]),
        ("questions", vec![]),
        ("questions/order/heatmap", vec![("res", "48".into()), ("cohort", "full".into())]),
        ("questions/order/transitions", tp("full")),
        ("questions/order/transitions", tp("wrong")),
        ("questions/order/compare", vec![("a", "full".into()), ("b", "wrong".into())]),
        ("correlation", vec![("k", "2".into())]),
        ("questions/missing/heatmap", vec![]),
    ];
    rt.block_on(async {
        let mut out = Vec::new();
        for (path, query) in requests {
            let body = match client.get_raw(path, &query).await {
                Ok(b) => b,
                Err(e) => e.to_string().into_bytes(),
            };
            out.push((format!("GET {path} {query:?}"), body));
        }
        Ok(out)
    })
}

fn determinism() -> Verdict {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let first = cli_outputs(a.path())?;
    let second = cli_outputs(b.path())?;
    if first.len() != second.len() {
        return Err("different number of CLI outputs".into());
    }
    for ((name, x), (_, y)) in first.iter().zip(&second) {
        if x != y {
            return Err(format!("CLI output {name} differs"));
        }
    }

    let rt = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| e.to_string())?;
    let state = Arc::new(AppState::new());
    let mut events = gen_dataset(&ordering_config(3, 30, 0.02)).map_err(|e| e.to_string())?;
    let labels = gen_dataset(&mislabel_config(3, true)).map_err(|e| e.to_string())?;
    events.events.extend(labels.events);
    events.metas.extend(labels.metas);
    let sessions = trailscope_core::event::group_sessions(events.events.clone());
    state.load(sessions, Some(events.metas), events.events.len());
    let client = rt.block_on(async {
        let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
        let addr = listener.local_addr().unwrap();
        tokio::spawn(trailscope_service::run(listener, router(state, None)));
        Client::new(format!("http://{addr}"))
    });
    let g1 = get_bodies(&client, &rt)?;
    let g2 = get_bodies(&client, &rt)?;
    for ((name, x), (_, y)) in g1.iter().zip(&g2) {
        if x != y {
            return Err(format!("{name} differs"));
        }
    }
    check(
        true,
        format!("{} CLI outputs and {} GET bodies identical across runs", first.len(), g1.len()),
    )
}

fn performance() -> Verdict {
    let ds = gen_dataset(&ordering_config(8, 880, 0.02)).map_err(|e| e.to_string())?;
    let mut log = Vec::new();
    write_event_log(&mut log, &ds.events).map_err(|e| e.to_string())?;
    let n_events = ds.events.len();
    drop(ds.events);

    let start = Instant::now();
    let report = parse_event_log(log.as_slice()).map_err(|e| e.to_string())?;
    let data = Dataset::from_events(report.events, Some(ds.metas));
    let heat = data
        .heatmap("order", &HeatmapParams::default())
        .map_err(|e| e.to_string())?;
    let trans = data
        .transitions("order", &TransitionParams::default())
        .map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    check(
        n_events >= 100_000 && secs < 2.0 && heat.grid.total_mass > 0.0 && !trans.map.edges.is_empty(),
        format!(
            "{n_events} events: ingest + heatmap + ROI + transitions in {secs:.3}s ({} ROIs)",
            trans.map.rois.len()
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Verdict); 8] = [
        ("ordering recovery", ordering_recovery),
        ("mislabel flagging", mislabel_flagging),
        ("thinking-pattern asymmetry", thinking_asymmetry),
        ("conservation", conservation),
        ("ROI monotonicity", roi_monotonicity),
        ("oracle equivalence", oracle_equivalence),
        ("determinism", determinism),
        ("performance", performance),
    ];
    let mut failed = 0;
    for (k, (name, run)) in criteria.iter().enumerate() {
        let verdict = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        match verdict {
            Ok(detail) => println!("criterion {} PASS {name}: {detail}", k + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} FAIL {name}: {detail}", k + 1);
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
