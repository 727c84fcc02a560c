use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;

/// Discriminative co-summarization of grouped videos.
#[derive(Debug, Parser)]
#[command(name = "vpsumm", version)]
struct Cli {
    /// JSON file with default values for any flag (flags take precedence).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads for parallel sections; results do not depend on it.
    #[arg(long, global = true, env = "VPSUMM_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cut a frame-difference signal into clips.
    Segment(SegmentArgs),
    /// Pool frame-level features into clip-level features.
    Pool(PoolArgs),
    /// Select s clips per video.
    Summarize(SummarizeArgs),
    /// Score a summary against importance annotations.
    Evaluate(EvaluateArgs),
    /// Write a planted synthetic dataset.
    Synth(SynthArgs),
    /// Exact minimizer by exhaustive search (tiny corpora only).
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct Output {
    /// Write the result here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct Objective {
    /// Corpus manifest (JSON).
    #[arg(long)]
    manifest: PathBuf,
    /// Clips selected per video.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    lambda1: Option<f64>,
    #[arg(long)]
    lambda2: Option<f64>,
    #[arg(long)]
    lambda3: Option<f64>,
}

#[derive(Debug, Args)]
struct SegmentArgs {
    /// One frame-difference fraction per line.
    #[arg(long)]
    diff: PathBuf,
    /// A fraction strictly above this starts a new clip.
    #[arg(long)]
    threshold: Option<f64>,
    #[arg(long)]
    video_id: Option<String>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct PoolArgs {
    /// Frame-level features (.vpsf or .csv).
    #[arg(long)]
    features: PathBuf,
    /// Clip list JSON from `segment`.
    #[arg(long)]
    clips: PathBuf,
    /// Frames covered by one feature row.
    #[arg(long)]
    stride: Option<usize>,
    /// Destination feature file (.vpsf or .csv).
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[command(flatten)]
    objective: Objective,
    /// Outer iteration cap.
    #[arg(long)]
    max_outer: Option<usize>,
    /// Inner solver gradient-mapping tolerance.
    #[arg(long)]
    qp_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Improve the rounded selection with single swaps.
    #[arg(long)]
    polish: bool,
    /// Selection method.
    #[arg(long, value_enum, default_value_t = commands::Method::Cccp)]
    method: commands::Method,
    /// Cluster count for the k-means method.
    #[arg(long)]
    clusters: Option<usize>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    /// Summary JSON from `summarize`.
    #[arg(long)]
    summary: PathBuf,
    /// Annotation CSV.
    #[arg(long)]
    annotations: PathBuf,
    /// Manifest of the summarized corpus (for groups and clip counts).
    #[arg(long)]
    manifest: PathBuf,
    /// Rank cutoff for AP; 0 scores the full ranking.
    #[arg(long)]
    k: Option<usize>,
    /// Fraction of clips taken as ground-truth positives.
    #[arg(long)]
    ratio: Option<f64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Dataset directory to create.
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    n_groups: Option<usize>,
    #[arg(long)]
    videos_per_group: Option<usize>,
    #[arg(long)]
    clips_per_video: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    noise_sigma: Option<f64>,
    #[arg(long)]
    separation: Option<f64>,
    #[arg(long)]
    n_shared: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[command(flatten)]
    objective: Objective,
    /// Largest number of selections to enumerate.
    #[arg(long, default_value_t = 1_000_000)]
    cap: u128,
    #[command(flatten)]
    output: Output,
}

/// Error reported as `{"error": {"code", "message"}}` on stderr.
#[derive(Debug)]
pub struct Failure {
    code: &'static str,
    message: String,
}

impl Failure {
    pub fn new(code: &'static str, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }
}

impl From<vpsumm::Error> for Failure {
    fn from(e: vpsumm::Error) -> Self {
        Self::new(e.code(), e.to_string())
    }
}

fn report(f: &Failure, exit: u8) -> ExitCode {
    let body = serde_json::json!({ "error": { "code": f.code, "message": f.message } });
    let _ = writeln!(std::io::stderr(), "{body}");
    ExitCode::from(exit)
}

fn run(cli: Cli) -> Result<(), Failure> {
    let file = config::ConfigFile::load(cli.config.as_deref())?;
    if let Some(n) = cli.threads.or(file.threads) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Failure::new("threads", e.to_string()))?;
    }
    match cli.command {
        Command::Segment(a) => commands::segment(a, &file),
        Command::Pool(a) => commands::pool(a, &file),
        Command::Summarize(a) => commands::summarize(a, &file),
        Command::Evaluate(a) => commands::evaluate(a, &file),
        Command::Synth(a) => commands::synth(a, &file),
        Command::Oracle(a) => commands::oracle(a, &file),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return report(&Failure::new("usage", e.to_string().trim_end()), 2),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let exit = if f.code == "usage" { 2 } else { 1 };
            report(&f, exit)
        }
    }
}
