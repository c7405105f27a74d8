mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use afflab_core::construction::DEFAULT_RESOURCE_CAP;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::output::{emit, Failure};

/// Almost-invariant sets, resistance certificates and expansion experiments
/// for the affine group over F_p.
#[derive(Parser, Debug)]
#[command(name = "afflab", version)]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct GlobalOpts {
    /// Master seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Absolute tolerance of iterative norm estimates.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Exit with status 1 unless the constructed set passes the invariance check.
    #[arg(long, global = true)]
    pub require_invariance: bool,
    /// Write a CSV view of the results here.
    #[arg(long, global = true, value_name = "PATH")]
    pub emit_plot_data: Option<PathBuf>,
    /// Write one JSON line per trial here.
    #[arg(long, global = true, value_name = "PATH")]
    pub emit_trials: Option<PathBuf>,
    /// Refuse constructions whose size bound or workload exceeds this.
    #[arg(long, global = true, default_value_t = DEFAULT_RESOURCE_CAP as u64)]
    pub resource_cap: u64,
    /// Directory for bitset dumps of large sets.
    #[arg(long, global = true, default_value = ".", value_name = "DIR")]
    pub dump_dir: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Table,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the almost-invariant set X for (p, A, ε) and check it.
    Construct(commands::ConstructArgs),
    /// Recheck a set, or a saved construct/resist report, against (p, A, ε).
    Verify(commands::VerifyArgs),
    /// Certify ‖(1/k) Σ ρ(g_i)‖ ≥ 1 − ε on the standard representation.
    Resist(commands::ResistArgs),
    /// Norms over every nontrivial irrep for a generator set.
    Expand(commands::ExpandArgs),
    /// Random-generator expansion trials in a cyclic or affine group.
    AlonRoichman(commands::AlonRoichmanArgs),
    /// Norms of averaged tensor powers of the S3 representation.
    Lmr(commands::LmrArgs),
    /// Exhaustive search for the smallest invariant set (p ≤ 24).
    Oracle(commands::OracleArgs),
    /// Oracle runs over seeded random sets A.
    Scan(commands::ScanArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Construct(_) => "construct",
            Command::Verify(_) => "verify",
            Command::Resist(_) => "resist",
            Command::Expand(_) => "expand",
            Command::AlonRoichman(_) => "alon-roichman",
            Command::Lmr(_) => "lmr",
            Command::Oracle(_) => "oracle",
            Command::Scan(_) => "scan",
        }
    }

    fn params(&self) -> serde_json::Value {
        let v = match self {
            Command::Construct(a) => serde_json::to_value(a),
            Command::Verify(a) => serde_json::to_value(a),
            Command::Resist(a) => serde_json::to_value(a),
            Command::Expand(a) => serde_json::to_value(a),
            Command::AlonRoichman(a) => serde_json::to_value(a),
            Command::Lmr(a) => serde_json::to_value(a),
            Command::Oracle(a) => serde_json::to_value(a),
            Command::Scan(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let g = &cli.global;
    if let Some(n) = g.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("afflab: cannot set up {n} worker threads: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match &cli.command {
        Command::Construct(a) => commands::construct(a, g),
        Command::Verify(a) => commands::verify(a, g),
        Command::Resist(a) => commands::resist(a, g),
        Command::Expand(a) => commands::expand(a, g),
        Command::AlonRoichman(a) => commands::alon_roichman(a, g),
        Command::Lmr(a) => commands::lmr(a, g),
        Command::Oracle(a) => commands::oracle(a, g),
        Command::Scan(a) => commands::scan(a, g),
    };
    let code = emit(cli.command.name(), cli.command.params(), g, start, result);
    ExitCode::from(code)
}

impl From<afflab_core::Error> for Failure {
    fn from(e: afflab_core::Error) -> Self {
        Failure::Core(e)
    }
}
