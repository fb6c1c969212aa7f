//! `pab`: command-line front end for the pay-as-bid auction solver.

mod commands;
mod error;
mod record;
mod scenario;
mod table;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{CliError, CliResult};
use crate::scenario::{Preset, ScenarioFile};

#[derive(Debug, Parser)]
#[command(name = "pab", version, about = "Pay-as-bid supply-function auction solver")]
struct Cli {
    /// Output format: aligned tables or a JSON result record.
    #[arg(long, value_enum, default_value_t = Format::Table, global = true)]
    format: Format,

    /// Worker threads for parallel runs (multi-start, sweeps).
    #[arg(long, env = "PAB_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Json,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ScenarioArgs {
    /// Path to a TOML scenario file.
    #[arg(long, value_name = "PATH")]
    scenario: Option<PathBuf>,
    /// Four-firm worked example with K = 5.
    #[arg(long)]
    paper_k5: bool,
    /// Four-firm worked example with K = 10.
    #[arg(long)]
    paper_k10: bool,
    /// Four-firm worked example with K = 1000.
    #[arg(long)]
    paper_k1000: bool,
    /// Two-firm increasing-differences counterexample.
    #[arg(long)]
    example1: bool,
}

impl ScenarioArgs {
    pub fn load(&self) -> CliResult<(String, ScenarioFile)> {
        let preset = if self.paper_k5 {
            Some(Preset::PaperK5)
        } else if self.paper_k10 {
            Some(Preset::PaperK10)
        } else if self.paper_k1000 {
            Some(Preset::PaperK1000)
        } else if self.example1 {
            Some(Preset::Example1)
        } else {
            None
        };
        match (preset, &self.scenario) {
            (Some(p), _) => Ok((p.name().to_string(), p.load()?)),
            (None, Some(path)) => Ok((path.display().to_string(), ScenarioFile::read(path)?)),
            (None, None) => Err(CliError::Validation("no scenario given".into())),
        }
    }
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Best-response displacement at which the iteration stops.
    #[arg(long, env = "PAB_TOLERANCE")]
    tolerance: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    /// Weight of the new best response in each update, in (0, 1].
    #[arg(long)]
    damping: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Clear the market for given kinked-offer breakpoints.
    Clear {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// One breakpoint per firm, comma separated.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true, required_unless_present = "all_at_cap")]
        breakpoints: Vec<f64>,
        /// Place every breakpoint at the price cap (zero supply).
        #[arg(long, conflicts_with = "breakpoints")]
        all_at_cap: bool,
    },
    /// Find a Nash equilibrium by damped best-response dynamics and certify it.
    Solve {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Additional runs from seeded random starting profiles.
        #[arg(long, default_value_t = 0)]
        multi_start: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Certificate threshold on any firm's deviation gain.
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
        /// Deviation grid size of the certificate.
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
    },
    /// Solve for each K and write one delimited row per K.
    Sweep {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[command(flatten)]
        solver: SolverArgs,
        /// Comma-separated positive, distinct K values.
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        k_values: Vec<f64>,
        /// CSV output path.
        #[arg(long, value_name = "PATH")]
        output: PathBuf,
    },
    /// Test increasing differences of the restricted utility.
    Supermod {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// One-based firm index (defaults to the scenario's quadruple, else 1).
        #[arg(long)]
        firm: Option<usize>,
        /// `own_low,own_high;others_low...;others_high...`
        #[arg(long, allow_hyphen_values = true)]
        quadruple: Option<String>,
        /// Ordered quadruples on a uniform grid with this many points per axis.
        #[arg(long, conflicts_with_all = ["quadruple", "random"])]
        grid: Option<usize>,
        /// This many seeded random quadruples.
        #[arg(long, conflicts_with = "quadruple")]
        random: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Keep only quadruples where the firm sells and the number of
        /// selling firms is constant.
        #[arg(long)]
        same_regime: bool,
    },
    /// Certify a breakpoint profile as an epsilon-Nash equilibrium.
    Verify {
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
        breakpoints: Vec<f64>,
        #[arg(long, default_value_t = 1e-2)]
        epsilon: f64,
        #[arg(long, default_value_t = 10_000)]
        grid: usize,
    },
    /// Apply the dominance transform and the kinked-offer improvement to a
    /// supply curve.
    Dominate {
        #[command(flatten)]
        scenario: ScenarioArgs,
        /// Supply curve nodes `p:q,p:q,...`, starting at `0:0` and ending at the price cap.
        #[arg(long)]
        curve: String,
        /// One-based index of the firm bidding the curve.
        #[arg(long, default_value_t = 1)]
        firm: usize,
        /// Kinked-offer breakpoints of the other firms.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        opponents: Vec<f64>,
        /// Use this clearing price instead of clearing the market.
        #[arg(long)]
        clearing_price: Option<f64>,
    },
}

fn run(cli: Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Validation(format!("cannot configure {n} threads: {e}")))?;
    }
    let format = cli.format;
    match cli.command {
        Command::Clear {
            scenario,
            breakpoints,
            all_at_cap,
        } => commands::clear(&scenario, breakpoints, all_at_cap, format),
        Command::Solve {
            scenario,
            solver,
            multi_start,
            seed,
            epsilon,
            grid,
        } => commands::solve(&scenario, &solver, multi_start, seed, epsilon, grid, format),
        Command::Sweep {
            scenario,
            solver,
            k_values,
            output,
        } => commands::sweep(&scenario, &solver, &k_values, &output, format),
        Command::Supermod {
            scenario,
            firm,
            quadruple,
            grid,
            random,
            seed,
            same_regime,
        } => commands::supermod(
            &scenario,
            commands::SupermodArgs {
                firm,
                quadruple,
                grid,
                random,
                seed,
                same_regime,
            },
            format,
        ),
        Command::Verify {
            scenario,
            breakpoints,
            epsilon,
            grid,
        } => commands::verify(&scenario, &breakpoints, epsilon, grid, format),
        Command::Dominate {
            scenario,
            curve,
            firm,
            opponents,
            clearing_price,
        } => commands::dominate(&scenario, &curve, firm, &opponents, clearing_price, format),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
