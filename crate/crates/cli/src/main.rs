//! `scuc`: load simulation, optimization, verification and comparison of
//! shipboard unit-commitment runs.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use scuc::report::LoadFactorMode;

/// Exit statuses; anything unexpected exits with 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Ok = 0,
    Internal = 1,
    Input = 2,
    Infeasible = 3,
    Limit = 4,
    Verification = 5,
}

/// A failure carrying the exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    pub exit: Exit,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(exit: Exit, error: impl Into<anyhow::Error>) -> Self {
        Failure { exit, error: error.into() }
    }
}

pub trait OrExit<T> {
    fn or_exit(self, exit: Exit) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrExit<T> for Result<T, E> {
    fn or_exit(self, exit: Exit) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(exit, e))
    }
}

#[derive(Parser)]
#[command(name = "scuc", version, about = "Security-constrained unit commitment for shipboard microgrids")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a load profile from an operating schedule.
    SimulateLoad(SimulateArgs),
    /// Build, solve, verify and report one run.
    Optimize(OptimizeArgs),
    /// Check a schedule against the operating and N-1 security rules.
    Verify(VerifyArgs),
    /// Compare two runs made on the same load profile.
    Compare(CompareArgs),
    /// Write the MILP in fixed MPS format.
    ExportMps(ExportArgs),
    /// Print the linearized fuel curves of every generator.
    DumpFuelCurves(CurveArgs),
}

#[derive(Args, Clone, Debug)]
pub struct InputArgs {
    /// Scenario JSON [default: bundled reference plant]
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Load profile CSV as written by simulate-load [default: generated]
    #[arg(long, conflicts_with = "oc_schedule")]
    pub profile: Option<PathBuf>,
    /// Operating schedule JSON used to generate the profile [default: bundled]
    #[arg(long)]
    pub oc_schedule: Option<PathBuf>,
    /// Seed for profile generation
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Drop the battery (generators only)
    #[arg(long)]
    pub no_bess: bool,
}

#[derive(Args, Clone, Debug)]
pub struct SolverArgs {
    /// Relative optimality gap at which the search stops
    #[arg(long, default_value_t = 0.01)]
    pub gap: f64,
    /// Node limit
    #[arg(long, default_value_t = 1_000_000)]
    pub nodes: usize,
    /// Time limit in seconds
    #[arg(long, default_value_t = 120.0)]
    pub time_limit: f64,
    /// Parallel node workers; results do not depend on this
    #[arg(long, default_value_t = 4)]
    pub workers: usize,
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Scenario JSON [default: bundled reference plant]
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Operating schedule JSON [default: bundled]
    #[arg(long)]
    pub oc_schedule: Option<PathBuf>,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub input: InputArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
    /// Re-run the inputs and options recorded in a manifest.json
    #[arg(long, conflicts_with_all = ["scenario", "profile", "oc_schedule", "no_bess"])]
    pub manifest: Option<PathBuf>,
    /// Average loading factor definition
    #[arg(long, value_enum, default_value_t = LfMode::UnitStep)]
    pub lf_mode: LfMode,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
pub enum LfMode {
    UnitStep,
    EnergyWeighted,
}

impl From<LfMode> for LoadFactorMode {
    fn from(m: LfMode) -> Self {
        match m {
            LfMode::UnitStep => LoadFactorMode::UnitStep,
            LfMode::EnergyWeighted => LoadFactorMode::EnergyWeighted,
        }
    }
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Schedule as schedule.csv, report.json or a schedule JSON
    #[arg(long)]
    pub schedule: PathBuf,
    /// Scenario JSON [default: bundled reference plant]
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Load profile CSV [default: loads and flags stored in the schedule]
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Drop the battery from the scenario
    #[arg(long)]
    pub no_bess: bool,
    /// Write the full margins as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// Baseline run directory
    pub run_a: PathBuf,
    /// Run directory compared against the baseline
    pub run_b: PathBuf,
    /// Write the comparison as JSON
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct ExportArgs {
    #[command(flatten)]
    pub input: InputArgs,
    /// Output MPS file
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct CurveArgs {
    /// Scenario JSON [default: bundled reference plant]
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Output CSV [default: standard output]
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::SimulateLoad(a) => commands::simulate_load(a),
        Command::Optimize(a) => commands::optimize(a),
        Command::Verify(a) => commands::verify(a),
        Command::Compare(a) => commands::compare(a),
        Command::ExportMps(a) => commands::export_mps(a),
        Command::DumpFuelCurves(a) => commands::dump_fuel_curves(a),
    };
    let exit = match result {
        Ok(exit) => exit,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            f.exit
        }
    };
    ExitCode::from(exit as u8)
}
