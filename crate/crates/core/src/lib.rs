//! Security-constrained unit commitment and dispatch for shipboard microgrids
//! made of diesel generators and a battery energy storage system.
//!
//! The pipeline is: [`scenario`] describes the plant, [`loadgen`] synthesizes
//! a ship load profile, [`fuelcurve`] linearizes generator fuel consumption,
//! [`milp`] builds the mixed-integer model, [`solver`] solves it, [`verify`]
//! replays the result against the physical rules independently of the model,
//! and [`report`] summarizes cost, fuel and emissions.

pub mod fuelcurve;
pub mod loadgen;
pub mod milp;
pub mod report;
pub mod scenario;
pub mod solver;
pub mod verify;

pub use fuelcurve::{fit_sfoc, linearize, PiecewiseFuelCurve, QuadraticSfoc};
pub use loadgen::{LoadProfile, MarkovChain, OperatingCondition};
pub use milp::{build_model, enumerate_combinations, extract_schedule, MilpModel, Schedule};
pub use report::{compute_report, read_schedule_csv, write_schedule_csv, LoadFactorMode, RunReport};
pub use scenario::{load_scenario, ScenarioConfig};
pub use solver::{solve_lp, solve_milp, MipOptions, MipResult};
