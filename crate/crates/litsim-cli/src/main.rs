//! Command-line harness: corpus ingestion, index building, batch execution,
//! and report generation.
//!
//! Exit codes: 0 success, 1 config/IO error, 2 total-run failure.

mod commands;

use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "litsim", version, about = "Deterministic literature-search simulation harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a corpus snapshot from line-delimited JSON paper records.
    Ingest(IngestArgs),
    /// Build a sparse (BM25) or dense (cosine) index over a snapshot.
    Index(IndexArgs),
    /// Run the workflow (or the direct-query baseline) over a benchmark.
    Run(RunArgs),
    /// Recompute metrics from persisted trajectories.
    Report(ReportArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Raw paper records, one JSON object per line.
    #[arg(long)]
    input: String,
    /// Snapshot file to write.
    #[arg(long)]
    snapshot: String,
    /// Ingest report (JSON) to write.
    #[arg(long)]
    report: Option<String>,
    /// Inclusive start of the publication-date validity window.
    #[arg(long, default_value = "1990-01-01")]
    window_start: String,
    /// Inclusive end of the publication-date validity window.
    #[arg(long, default_value = "2024-12-31")]
    window_end: String,
}

#[derive(Args)]
struct IndexArgs {
    /// Corpus snapshot file.
    #[arg(long)]
    snapshot: String,
    /// Index file to write.
    #[arg(long)]
    output: String,
    /// Retrieval backend to build.
    #[arg(long, value_parser = ["sparse", "dense"], default_value = "sparse")]
    backend: String,
    /// BM25 term-frequency saturation (sparse).
    #[arg(long, default_value_t = 1.2)]
    k1: f64,
    /// BM25 length normalization (sparse).
    #[arg(long, default_value_t = 0.75)]
    b: f64,
    /// Toy hash-embedder dimension (dense).
    #[arg(long, default_value_t = 64)]
    dim: usize,
}

#[derive(Args)]
struct RunArgs {
    /// Run configuration (TOML); flags below override its fields.
    #[arg(long)]
    config: String,
    /// Run the direct-query baseline instead of the iterative workflow.
    #[arg(long)]
    baseline: bool,
    /// Skip queries whose trajectory file already matches this config.
    #[arg(long)]
    resume: bool,
    #[arg(long)]
    corpus: Option<String>,
    #[arg(long)]
    benchmark: Option<String>,
    #[arg(long)]
    index: Option<String>,
    #[arg(long, value_parser = ["sparse", "dense"])]
    backend: Option<String>,
    #[arg(long, value_parser = ["abstract_only", "adaptive"])]
    mode: Option<String>,
    /// Max iterations T.
    #[arg(long)]
    iterations: Option<usize>,
    /// Worker cap; 0 = all cores, 1 = sequential.
    #[arg(long)]
    parallelism: Option<usize>,
    #[arg(long)]
    output_dir: Option<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory of trajectory files.
    #[arg(long)]
    trajectories: String,
    /// Where to write report.json / report.txt / curves.csv.
    #[arg(long)]
    output_dir: String,
    /// Benchmark file; defaults to the path stored in the trajectories.
    #[arg(long)]
    benchmark: Option<String>,
    /// Snapshot file; defaults to the path stored in the trajectories.
    #[arg(long)]
    snapshot: Option<String>,
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Usage problems are config errors, not run failures.
            let _ = e.print();
            std::process::exit(1);
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();

    let outcome = match cli.command {
        Command::Ingest(args) => commands::ingest(args),
        Command::Index(args) => commands::index(args),
        Command::Run(args) => commands::run(args),
        Command::Report(args) => commands::report(args),
    };
    match outcome {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(1);
        }
    }
}
