//! `crex`: import, curate and analyze cited references from the command line.
//! Every step reads and writes a `.cre` working file.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use crex_core::model::{CrId, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Wos,
    Scopus,
}

#[derive(Debug, Parser)]
#[command(name = "crex", version, about = "Cited-reference explorer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

fn parse_threshold(s: &str) -> Result<f64, String> {
    let t: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..=1.0).contains(&t) {
        Ok(t)
    } else {
        Err(format!("{t} is outside [0, 1]"))
    }
}

fn parse_verdict(s: &str) -> Result<Verdict, String> {
    s.parse()
        .map_err(|_| format!("expected same or different, got {s:?}"))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Read vendor exports into a new working file.
    Import {
        #[arg(long, value_enum)]
        format: Format,
        #[arg(required = true)]
        files: Vec<PathBuf>,
        #[arg(short, long)]
        output: PathBuf,
        /// Carry manual decisions over from an earlier working file.
        #[arg(long)]
        decisions_from: Option<PathBuf>,
    },
    /// Write the dataset as a vendor export; conversion losses go to stderr.
    Export {
        #[arg(long, value_enum)]
        format: Format,
        state: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Score candidate pairs and group variants into clusters.
    Cluster {
        #[arg(long, value_parser = parse_threshold)]
        threshold: Option<f64>,
        #[arg(long)]
        rpy_slack: Option<u32>,
        /// Compare references across all years.
        #[arg(long)]
        all_years: bool,
        state: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Record a manual same/different decision on two references.
    Decide {
        a: CrId,
        b: CrId,
        #[arg(value_parser = parse_verdict)]
        verdict: Verdict,
        state: PathBuf,
    },
    /// Collapse every cluster into its representative.
    Merge {
        state: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Per-year counts and median deviation as CSV.
    Rpys {
        state: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Most frequent references of one year.
    Top {
        #[arg(long)]
        rpy: i32,
        #[arg(short, default_value_t = 10)]
        k: usize,
        state: PathBuf,
    },
    /// Drop references cited with a year in the range.
    RemoveYear {
        #[arg(long)]
        from: i32,
        #[arg(long)]
        to: i32,
        /// Also drop references without a year.
        #[arg(long)]
        drop_missing: bool,
        state: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// All bibliographic details of one reference.
    Details {
        #[arg(long)]
        cr: CrId,
        state: PathBuf,
    },
    /// Start the local curation service.
    Serve {
        state: PathBuf,
        #[arg(long, default_value_t = 8088)]
        port: u16,
        /// Directory with the built curation UI.
        #[arg(long)]
        assets: Option<PathBuf>,
    },
}

fn init_logging() {
    let level = match std::env::var("CRX_LOG").as_deref() {
        Ok("quiet") => log::LevelFilter::Error,
        Ok("info") => log::LevelFilter::Info,
        Ok("debug") => log::LevelFilter::Debug,
        _ => log::LevelFilter::Warn,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .target(env_logger::Target::Stderr)
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    init_logging();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
