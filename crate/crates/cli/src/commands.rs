use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::CommandFactory;
use tokio::net::TcpListener;
use trailscope_client::{Client, ClientError};
use trailscope_core::event::{
    group_sessions, parse_canvas, parse_event_log_with, parse_question_meta, Cohort, EventType,
    ParseOptions, ParseReport,
};
use trailscope_core::pipeline::{Dataset, HeatmapParams, TransitionParams, TransitionsResult};
use trailscope_core::synthgen::{gen_dataset, DatasetConfig};
use trailscope_service::{load_files, router, AppState};

use crate::args::{Cli, Command, Endpoint, InputArgs, TransitionArgs};

/// A command failure and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Well-formed request the data cannot satisfy: exit 1.
    Domain(String),
    /// Bad argument value; the subcommand's usage is printed: exit 1.
    Usage { subcommand: &'static str, message: String },
    /// Unreadable or unwritable files, unreachable server: exit 2.
    Io(String),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Domain(_) | Failure::Usage { .. } => 1,
            Failure::Io(_) => 2,
        }
    }

    pub fn report(&self) {
        match self {
            Failure::Domain(m) | Failure::Io(m) => eprintln!("error: {m}"),
            Failure::Usage {
                subcommand,
                message,
            } => {
                let mut cmd = Cli::command();
                cmd.build();
                let usage = cmd
                    .find_subcommand_mut(subcommand)
                    .map(|c| c.render_usage().to_string())
                    .unwrap_or_default();
                eprintln!("error: {message}\n\n{usage}");
            }
        }
    }
}

impl From<trailscope_core::Error> for Failure {
    fn from(e: trailscope_core::Error) -> Self {
        use trailscope_core::Error as E;
        match e {
            E::Io(_) | E::Json(_) => Failure::Io(e.to_string()),
            _ => Failure::Domain(e.to_string()),
        }
    }
}

impl From<ClientError> for Failure {
    fn from(e: ClientError) -> Self {
        match e {
            ClientError::Api { .. } => Failure::Domain(e.to_string()),
            ClientError::Http(_) | ClientError::Decode(_) => Failure::Io(e.to_string()),
        }
    }
}

type Outcome = Result<(), Failure>;

fn io_err(path: &Path, e: io::Error) -> Failure {
    Failure::Io(format!("{}: {e}", path.display()))
}

fn usage(subcommand: &'static str, e: trailscope_core::Error) -> Failure {
    Failure::Usage {
        subcommand,
        message: e.to_string(),
    }
}

fn cohort(subcommand: &'static str, raw: &str) -> Result<Cohort, Failure> {
    raw.parse().map_err(|e| usage(subcommand, e))
}

fn canvas(subcommand: &'static str, raw: Option<&str>) -> Result<Option<(f64, f64)>, Failure> {
    raw.map(parse_canvas)
        .transpose()
        .map_err(|e| usage(subcommand, e))
}

fn with_ext(prefix: &Path, ext: &str) -> PathBuf {
    let mut s: OsString = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn write_file(path: &Path, bytes: &[u8]) -> Outcome {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn read_log(path: &Path, canvas: Option<(f64, f64)>) -> Result<ParseReport, Failure> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_event_log_with(BufReader::new(file), ParseOptions { canvas }).map_err(|e| io_err(path, e))
}

fn read_meta(path: &Path) -> Result<Vec<trailscope_core::event::QuestionMeta>, Failure> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    parse_question_meta(BufReader::new(file)).map_err(|e| match e {
        trailscope_core::Error::Io(e) => io_err(path, e),
        other => Failure::Io(format!("{}: {other}", path.display())),
    })
}

fn load(subcommand: &'static str, input: &InputArgs) -> Result<Dataset, Failure> {
    let canvas = canvas(subcommand, input.canvas.as_deref())?;
    let report = read_log(&input.events, canvas)?;
    if !report.errors.is_empty() {
        eprintln!(
            "warning: skipped {} malformed line(s) in {}",
            report.errors.len(),
            input.events.display()
        );
    }
    let metas = input.meta.as_deref().map(read_meta).transpose()?;
    Ok(Dataset::from_events(report.events, metas))
}

fn transition_params(args: &TransitionArgs, cohort: Cohort) -> TransitionParams {
    TransitionParams {
        roi_size: args.roi_size,
        tau: args.tau,
        min_events: args.min_events,
        bins: args.bins,
        min_edge: args.min_edge,
        cohort,
        res: args.res,
        sigma: args.sigma,
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<Vec<u8>, Failure> {
    serde_json::to_vec(value).map_err(|e| Failure::Domain(e.to_string()))
}

pub fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Validate { events, canvas: c } => validate(&events, canvas("validate", c.as_deref())?),
        Command::Heatmap {
            input,
            question,
            res,
            sigma,
            cohort: c,
            dwell,
            out,
        } => {
            let params = HeatmapParams {
                res,
                sigma,
                cohort: cohort("heatmap", &c)?,
                dwell,
            };
            let ds = load("heatmap", &input)?;
            let result = ds.heatmap(&question, &params)?;
            write_file(&with_ext(&out, "json"), &to_json(&result)?)?;
            write_file(&with_ext(&out, "pgm"), &result.grid.to_pgm())?;
            println!(
                "{}: {} sessions, total mass {}",
                question, result.session_count, result.grid.total_mass
            );
            Ok(())
        }
        Command::Transitions {
            input,
            question,
            params,
            cohort: c,
            out,
        } => {
            let params = transition_params(&params, cohort("transitions", &c)?);
            params.validate()?;
            let ds = load("transitions", &input)?;
            let map = ds.transition_map(&question, &params, params.cohort)?;
            let result = TransitionsResult {
                question_id: question.clone(),
                params,
                map: map.export(),
            };
            write_file(&with_ext(&out, "json"), &to_json(&result)?)?;
            write_file(&with_ext(&out, "dot"), map.to_dot().as_bytes())?;
            let score = result
                .map
                .ordering_score
                .map_or_else(|| "undefined".to_string(), |s| s.to_string());
            println!(
                "{}: {} sessions, {} ROIs, {} edges, ordering score {}",
                question,
                result.map.session_count,
                result.map.rois.len(),
                result.map.edges.len(),
                score
            );
            Ok(())
        }
        Command::Correlate { events, meta, k, out } => {
            let input = InputArgs {
                events,
                meta: Some(meta),
                canvas: None,
            };
            let report = load("correlate", &input)?.correlation(k)?;
            write_file(&with_ext(&out, "json"), &to_json(&report)?)?;
            let mut csv = Vec::new();
            report.write_csv(&mut csv)?;
            write_file(&with_ext(&out, "csv"), &csv)?;
            println!(
                "pearson r {}, spearman rho {}, flagged: {}",
                report.pearson_r,
                report.spearman_rho,
                report
                    .flagged
                    .iter()
                    .map(|f| f.question_id.as_str())
                    .collect::<Vec<_>>()
                    .join(",")
            );
            Ok(())
        }
        Command::Generate { config, events, meta } => {
            let file = File::open(&config).map_err(|e| io_err(&config, e))?;
            let cfg = DatasetConfig::from_reader(BufReader::new(file))?;
            let ds = gen_dataset(&cfg)?;
            ds.write_files(&events, &meta)?;
            println!("generated {} events for {} questions", ds.events.len(), ds.metas.len());
            Ok(())
        }
        Command::Serve {
            port,
            host,
            data,
            meta,
            canvas: c,
            static_dir,
        } => {
            let canvas = canvas("serve", c.as_deref())?;
            serve(&host, port, data, meta, canvas, static_dir)
        }
        Command::Query {
            server,
            out,
            endpoint,
        } => query(&server, out.as_deref(), endpoint),
    }
}

fn validate(events: &Path, canvas: Option<(f64, f64)>) -> Outcome {
    let report = read_log(events, canvas)?;
    let positional = report.events.iter().filter(|e| e.is_positional()).count();
    let mut per_type: BTreeMap<EventType, usize> = EventType::ALL.iter().map(|&t| (t, 0)).collect();
    for e in &report.events {
        *per_type.entry(e.event_type).or_default() += 1;
    }
    let n_events = report.events.len();
    let sessions = group_sessions(report.events);
    let mut questions: Vec<&str> = sessions.iter().map(|s| s.question_id.as_str()).collect();
    questions.sort_unstable();
    questions.dedup();

    let mut out = io::stdout().lock();
    let _ = writeln!(out, "events: {n_events}");
    let _ = writeln!(out, "positional: {positional}");
    let _ = writeln!(out, "sessions: {}", sessions.len());
    let _ = writeln!(out, "questions: {}", questions.len());
    for (t, n) in &per_type {
        let _ = writeln!(out, "type {t}: {n}");
    }
    let _ = writeln!(out, "clamped: {}", report.warnings.len());
    let _ = writeln!(out, "errors: {}", report.errors.len());
    for e in &report.errors {
        let _ = writeln!(out, "line {}: {}", e.line, e.reason);
    }
    if report.errors.is_empty() {
        Ok(())
    } else {
        Err(Failure::Domain(format!(
            "{} malformed line(s) in {}",
            report.errors.len(),
            events.display()
        )))
    }
}

fn runtime() -> Result<tokio::runtime::Runtime, Failure> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| Failure::Io(format!("cannot start runtime: {e}")))
}

fn serve(
    host: &str,
    port: u16,
    data: Option<PathBuf>,
    meta: Option<PathBuf>,
    canvas: Option<(f64, f64)>,
    static_dir: Option<PathBuf>,
) -> Outcome {
    let state = Arc::new(AppState::new());
    if let Some(events) = &data {
        let report = load_files(&state, events, meta.as_deref(), ParseOptions { canvas })?;
        if !report.errors.is_empty() {
            eprintln!(
                "warning: skipped {} malformed line(s) in {}",
                report.errors.len(),
                events.display()
            );
        }
    }
    let rt = runtime()?;
    rt.block_on(async {
        let listener = TcpListener::bind((host, port))
            .await
            .map_err(|e| Failure::Io(format!("cannot listen on {host}:{port}: {e}")))?;
        trailscope_service::run(listener, router(state, static_dir))
            .await
            .map_err(|e| Failure::Io(format!("server error: {e}")))
    })
}

fn query(server: &str, out: Option<&Path>, endpoint: Endpoint) -> Outcome {
    let client = Client::new(server);
    let body = runtime()?.block_on(async {
        let raw = match endpoint {
            Endpoint::Status => client.get_raw("status", &[]).await?,
            Endpoint::Questions => client.get_raw("questions", &[]).await?,
            Endpoint::Heatmap {
                question,
                res,
                sigma,
                cohort: c,
                dwell,
            } => {
                let params = HeatmapParams {
                    res,
                    sigma,
                    cohort: cohort("query", &c)?,
                    dwell,
                };
                let q = trailscope_client::heatmap_query(&params);
                client.get_raw(&format!("questions/{question}/heatmap"), &q).await?
            }
            Endpoint::Transitions {
                question,
                params,
                cohort: c,
            } => {
                let q = trailscope_client::transition_query(&transition_params(&params, cohort("query", &c)?));
                client.get_raw(&format!("questions/{question}/transitions"), &q).await?
            }
            Endpoint::Compare {
                question,
                params,
                a,
                b,
            } => {
                let mut q = trailscope_client::transition_query(&transition_params(&params, Cohort::All));
                q.push(("a", cohort("query", &a)?.to_string()));
                q.push(("b", cohort("query", &b)?.to_string()));
                client.get_raw(&format!("questions/{question}/compare"), &q).await?
            }
            Endpoint::Correlation { k } => client.get_raw("correlation", &[("k", k.to_string())]).await?,
            Endpoint::Ingest {
                events,
                meta,
                canvas: c,
            } => {
                let canvas = canvas("query", c.as_deref())?;
                let metas = meta.as_deref().map(read_meta).transpose()?;
                let log = fs::read(&events).map_err(|e| io_err(&events, e))?;
                let mut resp = client.ingest(log, canvas).await?;
                if let Some(metas) = metas {
                    resp.snapshot_id = client.set_meta(&metas).await?.snapshot_id.unwrap_or(resp.snapshot_id);
                }
                to_json(&resp)?
            }
        };
        Ok::<_, Failure>(raw)
    })?;
    match out {
        Some(path) => write_file(path, &body),
        None => {
            let mut stdout = io::stdout().lock();
            stdout
                .write_all(&body)
                .and_then(|_| stdout.write_all(b"\n"))
                .map_err(|e| Failure::Io(e.to_string()))
        }
    }
}
