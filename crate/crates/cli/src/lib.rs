//! The `realign` command line.
//!
//! Every subcommand writes its artifacts under `--out` with fixed names and
//! nothing else, so identical invocations leave identical files behind.

mod commands;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use thiserror::Error;

pub use commands::run;

pub const CANDIDATES_CSV: &str = "candidates.csv";
pub const SUMMARY_CSV: &str = "summary.csv";
pub const BEST_GEOJSON: &str = "best.geojson";
pub const DIFF_CSV: &str = "diff.csv";
pub const MODEL_LP: &str = "model.lp";
pub const WARM_START: &str = "warm_start.txt";
pub const CERTIFICATE_JSON: &str = "certificate.json";

/// Exit status for a search that ran out of budget.
pub const EXIT_BUDGET: u8 = 2;
/// Exit status for invalid input.
pub const EXIT_INPUT: u8 = 1;

#[derive(Debug, Parser)]
#[command(name = "realign", version, about = "Realign sports leagues by minimizing a travel surrogate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate, filter and rank hull-disjoint structures.
    Generate(GenerateArgs),
    /// Solve exactly on small leagues or export the integer program.
    Exact(ExactArgs),
    /// Run a relocation or expansion scenario file.
    Scenario(ScenarioArgs),
    /// Summary block, per-team travel diff and hull map.
    Report(ReportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct LeagueArgs {
    /// Bundled league id or path to a dataset JSON file.
    #[arg(long)]
    pub dataset: String,
    /// Template name for the league, or path to a template JSON file.
    #[arg(long)]
    pub template: Option<String>,
    /// Preset names or constraint JSON files (repeatable, comma separated).
    #[arg(long, value_delimiter = ',')]
    pub constraints: Vec<String>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Skip top-level cuts within this many degrees of horizontal (0 disables).
    #[arg(long, default_value_t = 30.0)]
    pub filter_angle: f64,
    /// Keep every candidate rather than a bounded top set.
    #[arg(long)]
    pub keep_all: bool,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[command(flatten)]
    pub league: LeagueArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Number of ranked structures to write.
    #[arg(long, default_value_t = 10)]
    pub top: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum MethodArg {
    BranchAndBound,
    Exhaustive,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    #[command(flatten)]
    pub league: LeagueArgs,
    /// Angle filter for the heuristic run that is certified and used as warm start.
    #[arg(long, default_value_t = 30.0)]
    pub filter_angle: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value_t = MethodArg::BranchAndBound)]
    pub method: MethodArg,
    /// Wall-clock budget in seconds.
    #[arg(long)]
    pub time_limit: Option<f64>,
    /// Search-node budget.
    #[arg(long)]
    pub node_limit: Option<u64>,
    /// Write the LP model and warm start without solving.
    #[arg(long)]
    pub export_only: bool,
    /// Add exclusion rows to the LP for team pairs farther apart than this (miles).
    #[arg(long)]
    pub exclude_above: Option<f64>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    /// Scenario JSON file.
    #[arg(long)]
    pub file: PathBuf,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Overrides the scenario's top_k.
    #[arg(long)]
    pub top: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[command(flatten)]
    pub league: LeagueArgs,
    #[command(flatten)]
    pub search: SearchArgs,
    /// Extra summary row: `LABEL=preset[+preset...]`, solved on top of --constraints.
    #[arg(long)]
    pub variant: Vec<String>,
    /// Structure JSON to compare against the current alignment instead of the best one.
    #[arg(long)]
    pub alternative: Option<PathBuf>,
    /// Jet fuel burned per mile flown.
    #[arg(long, default_value_t = realign::reports::DEFAULT_GALLONS_PER_MILE)]
    pub gallons_per_mile: f64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: String,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] realign::Error),
    #[error("{0}")]
    Input(String),
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(realign::Error::BudgetExceeded { .. }) => EXIT_BUDGET,
            _ => EXIT_INPUT,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
