use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use trailscope_core::analytics::DEFAULT_K_SIGMA;
use trailscope_core::heatmap::{DEFAULT_RESOLUTION, DEFAULT_SIGMA};
use trailscope_core::roi::RoiParams;
use trailscope_core::transition::DEFAULT_MIN_EDGE_COUNT;

#[derive(Debug, Parser)]
#[command(name = "trailscope", version, about = "Mouse-interaction analytics for online exercises")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse an event log and report counts and malformed lines.
    Validate {
        #[arg(long)]
        events: PathBuf,
        /// Raw pixel canvas size; x and y are divided by it.
        #[arg(long, value_name = "WxH")]
        canvas: Option<String>,
    },
    /// Write a question's smoothed heat map as PREFIX.json and PREFIX.pgm.
    Heatmap {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        question: String,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        res: usize,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        /// all | full | wrong | range:lo-hi
        #[arg(long, default_value = "all")]
        cohort: String,
        /// Weight samples by dwell time.
        #[arg(long)]
        dwell: bool,
        #[arg(long, value_name = "PREFIX")]
        out: PathBuf,
    },
    /// Write a cohort's transition map as PREFIX.json and PREFIX.dot.
    Transitions {
        #[command(flatten)]
        input: InputArgs,
        #[arg(long)]
        question: String,
        #[command(flatten)]
        params: TransitionArgs,
        /// all | full | wrong | range:lo-hi
        #[arg(long, default_value = "all")]
        cohort: String,
        #[arg(long, value_name = "PREFIX")]
        out: PathBuf,
    },
    /// Write the difficulty/score report as PREFIX.json and PREFIX.csv.
    Correlate {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        meta: PathBuf,
        #[arg(long, default_value_t = DEFAULT_K_SIGMA)]
        k: f64,
        #[arg(long, value_name = "PREFIX")]
        out: PathBuf,
    },
    /// Generate a synthetic dataset from a JSON config.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        meta: PathBuf,
    },
    /// Run the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
        /// Event log loaded at startup.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, requires = "data")]
        meta: Option<PathBuf>,
        #[arg(long, value_name = "WxH", requires = "data")]
        canvas: Option<String>,
        /// Directory served under `/` (the browser UI bundle).
        #[arg(long = "static", value_name = "DIR")]
        static_dir: Option<PathBuf>,
    },
    /// Call a running server and print the response body.
    Query {
        /// Server root URL.
        #[arg(long, global = true, default_value = "http://127.0.0.1:8080")]
        server: String,
        /// Write the body here instead of stdout.
        #[arg(long, global = true)]
        out: Option<PathBuf>,
        #[command(subcommand)]
        endpoint: Endpoint,
    },
}

#[derive(Debug, Args)]
pub struct InputArgs {
    #[arg(long)]
    pub events: PathBuf,
    /// Question metadata; without it max scores are taken from the data.
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[arg(long, value_name = "WxH")]
    pub canvas: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct TransitionArgs {
    /// ROI merge radius in normalized canvas units.
    #[arg(long, default_value_t = RoiParams::default().merge_radius)]
    pub roi_size: f64,
    #[arg(long, default_value_t = RoiParams::default().tau)]
    pub tau: f64,
    #[arg(long, default_value_t = RoiParams::default().min_events)]
    pub min_events: usize,
    #[arg(long, default_value_t = RoiParams::default().time_bins)]
    pub bins: usize,
    #[arg(long, default_value_t = DEFAULT_MIN_EDGE_COUNT)]
    pub min_edge: usize,
    #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
    pub res: usize,
    #[arg(long, default_value_t = DEFAULT_SIGMA)]
    pub sigma: f64,
}

#[derive(Debug, Subcommand)]
pub enum Endpoint {
    Status,
    Questions,
    Heatmap {
        #[arg(long)]
        question: String,
        #[arg(long, default_value_t = DEFAULT_RESOLUTION)]
        res: usize,
        #[arg(long, default_value_t = DEFAULT_SIGMA)]
        sigma: f64,
        #[arg(long, default_value = "all")]
        cohort: String,
        #[arg(long)]
        dwell: bool,
    },
    Transitions {
        #[arg(long)]
        question: String,
        #[command(flatten)]
        params: TransitionArgs,
        #[arg(long, default_value = "all")]
        cohort: String,
    },
    Compare {
        #[arg(long)]
        question: String,
        #[command(flatten)]
        params: TransitionArgs,
        #[arg(long, default_value = "full")]
        a: String,
        #[arg(long, default_value = "wrong")]
        b: String,
    },
    Correlation {
        #[arg(long, default_value_t = DEFAULT_K_SIGMA)]
        k: f64,
    },
    /// Replace the server's events (and optionally metadata).
    Ingest {
        #[arg(long)]
        events: PathBuf,
        #[arg(long)]
        meta: Option<PathBuf>,
        #[arg(long, value_name = "WxH")]
        canvas: Option<String>,
    },
}
