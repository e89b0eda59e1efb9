//! `echotrace`: extract descriptors, retrieve replicated queries, cluster
//! duplicates, calibrate thresholds and serve the review interface.
//!
//! Exit codes: 0 success, 1 input error, 2 contract violation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::PipelineConfig;

#[derive(Parser, Debug)]
#[command(name = "echotrace", version, about = "Audio training-data replication and duplicate detection")]
struct Cli {
    /// Pipeline configuration file (TOML); flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Log progress to stderr (repeat for more detail).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ScoreFlags {
    /// Background neighbours averaged into the bias.
    #[arg(long)]
    pub k: Option<usize>,
    /// Weight of the background bias.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Rows per block in the similarity search.
    #[arg(long)]
    pub block_size: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compute mel descriptors for a manifest into a descriptor file, reusing
    /// unchanged rows already present in it.
    Extract {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reorder an external embedding file to a manifest.
    Import {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Retrieve queries whose top-1 normalized score reaches tau.
    Retrieve {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        tau: Option<f64>,
        #[command(flatten)]
        score: ScoreFlags,
    },
    /// Cluster mutually similar clips of one corpus.
    Dedup {
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        tau: Option<f64>,
        /// Also report edge and cluster counts at these thresholds.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        sweep: Vec<f64>,
        #[command(flatten)]
        score: ScoreFlags,
    },
    /// Top-1 score histograms of queries→refs and refs→refs, with a
    /// threshold calibration report.
    Hist {
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        refs: PathBuf,
        #[arg(long)]
        background: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        /// Skip the refs→refs histogram and the calibration.
        #[arg(long)]
        no_self: bool,
        #[command(flatten)]
        score: ScoreFlags,
    },
    /// Find the threshold on a result that retrieves a given number of queries.
    MatchCount {
        #[arg(long)]
        result: PathBuf,
        #[arg(long, conflicts_with = "like", required_unless_present = "like")]
        n: Option<usize>,
        /// Use the number of queries retrieved in this other result.
        #[arg(long)]
        like: Option<PathBuf>,
        /// Write the result re-thresholded at the found tau.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve a review session over HTTP.
    Serve {
        #[arg(long)]
        session: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: String,
    },
    /// Print the effective configuration as TOML.
    Config,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.report());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), commands::Failure> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.workers.is_some() {
        cfg.workers = cli.workers;
    }
    cfg.validate()?;
    let workers = cfg.workers;
    match cli.command {
        Command::Serve { session, addr } => commands::serve(&session, &addr),
        Command::Config => commands::print_config(&cfg),
        cmd => echotrace_core::exec::with_workers(workers, move || match cmd {
            Command::Extract { manifest, out } => commands::extract(&cfg, &manifest, &out),
            Command::Import { manifest, embeddings, out } => commands::import(&manifest, &embeddings, &out),
            Command::Retrieve {
                queries,
                refs,
                background,
                out,
                tau,
                score,
            } => {
                if let Some(t) = tau {
                    cfg.retrieval.tau = t;
                }
                commands::apply_score_flags(&mut cfg, &score)?;
                commands::retrieve(&cfg, &queries, &refs, &background, &out)
            }
            Command::Dedup {
                refs,
                background,
                out,
                tau,
                sweep,
                score,
            } => {
                if let Some(t) = tau {
                    cfg.dedup.tau = t;
                }
                commands::apply_score_flags(&mut cfg, &score)?;
                commands::dedup(&cfg, &refs, &background, &out, &sweep)
            }
            Command::Hist {
                queries,
                refs,
                background,
                out,
                bins,
                no_self,
                score,
            } => {
                if let Some(b) = bins {
                    cfg.histogram.bins = b;
                }
                commands::apply_score_flags(&mut cfg, &score)?;
                commands::hist(&cfg, &queries, &refs, &background, &out, !no_self)
            }
            Command::MatchCount { result, n, like, out } => {
                commands::match_count(&cfg, &result, n, like.as_deref(), out.as_deref())
            }
            Command::Serve { .. } | Command::Config => unreachable!(),
        }),
    }
}
