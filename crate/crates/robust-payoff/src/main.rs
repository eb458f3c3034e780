use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use robust_payoff::cli::{self, CommandKind, Overrides};

/// Cost-efficient and robust cost-efficient payoffs under model ambiguity.
#[derive(Debug, Parser)]
#[command(name = "robust-payoff", version, about)]
struct Args {
    #[command(subcommand)]
    command: Command,

    /// Scenario file (JSON); each command has a built-in default.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (default `out`; the ROBUST_PAYOFF_OUT environment
    /// variable takes precedence).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Seed override for the Monte Carlo cross-checks.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Tolerance override for dominance checks.
    #[arg(long, global = true)]
    tol: Option<f64>,

    /// Grid-size override for dominance checks and strike grids.
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the robust cost-efficient payoff with a Monte Carlo cross-check.
    Price,
    /// Standard cost-efficient payoff under the least favorable measure.
    Efficient,
    /// Robust cost-efficient payoff with the full hypothesis report.
    RobustEfficient,
    /// Stochastic-dominance verdicts between target and reference laws.
    OrderCheck,
    /// Robust rank-dependent-utility optimum.
    Rdu,
    /// Rationalizing utility of the robust payoff.
    Rationalize,
    /// Price and payoff curves over the drift ambiguity bound.
    Figure1,
    /// Third-order cost-inconsistency counterexample.
    TsdCounterexample,
    /// Static call replication of the robust payoff.
    Replicate,
}

impl Command {
    fn kind(&self) -> CommandKind {
        match self {
            Command::Price => CommandKind::Price,
            Command::Efficient => CommandKind::Efficient,
            Command::RobustEfficient => CommandKind::RobustEfficient,
            Command::OrderCheck => CommandKind::OrderCheck,
            Command::Rdu => CommandKind::Rdu,
            Command::Rationalize => CommandKind::Rationalize,
            Command::Figure1 => CommandKind::Figure1,
            Command::TsdCounterexample => CommandKind::TsdCounterexample,
            Command::Replicate => CommandKind::Replicate,
        }
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let overrides = Overrides {
        out: args.out,
        seed: args.seed,
        tol: args.tol,
        grid: args.grid,
    };
    match cli::run(args.command.kind(), args.config.as_deref(), &overrides) {
        Ok(output) => {
            if let Some(p) = &output.csv_path {
                println!("wrote {}", p.display());
            }
            if let Some(p) = &output.summary_path {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(cli::exit_code_for(&e) as u8)
        }
    }
}
