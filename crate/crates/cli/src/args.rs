use std::path::PathBuf;

use cdt_core::bilevel::UpperSolver;
use cdt_core::oracle::Family;
use clap::{Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "cdt",
    version,
    about = "Canonical duality knapsack and topology solvers",
    allow_negative_numbers = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve one knapsack instance file and write its report.
    SolveKnap {
        /// JSON instance `{"c": [...], "v": [...], "V_c": x, "Q": [[...]]}`.
        instance: PathBuf,
        #[arg(long, value_enum, default_value = "lkp-analytic")]
        solver: SolverArg,
        /// Report file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Single penalty weight for the β solvers.
        #[arg(long)]
        beta: Option<f64>,
    },
    /// Compare a solver against brute force on a seeded random family.
    OracleCheck {
        #[arg(long, value_enum, default_value = "linear")]
        family: FamilyArg,
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 15)]
        n: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Defaults to lkp-analytic for linear and qkp-alpha for quadratic families.
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        beta: Option<f64>,
        /// Directory for `summary.json`; the summary is always printed.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the bilevel topology design from a TOML or JSON run file.
    Topo {
        config: PathBuf,
        /// Output directory; overrides `output.dir`.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        solver: Option<SolverArg>,
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        omega: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SolverArg {
    LkpAnalytic,
    LkpBeta,
    QkpBeta,
    QkpAlpha,
}

impl From<SolverArg> for UpperSolver {
    fn from(s: SolverArg) -> Self {
        match s {
            SolverArg::LkpAnalytic => UpperSolver::LkpAnalytic,
            SolverArg::LkpBeta => UpperSolver::LkpBeta,
            SolverArg::QkpBeta => UpperSolver::QkpBeta,
            SolverArg::QkpAlpha => UpperSolver::QkpAlpha,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Linear,
    Quadratic,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Linear => Family::Linear,
            FamilyArg::Quadratic => Family::Quadratic,
        }
    }
}
