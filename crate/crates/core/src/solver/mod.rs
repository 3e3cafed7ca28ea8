//! LP and MILP solving: a bounded dual simplex, branch and bound over the
//! unit-status binaries, and MPS interchange.

pub mod lp;
pub mod lu;
pub mod mip;
pub mod mps;

pub use lp::{solve_lp, LpError, LpProblem, LpSolution, LpStatus};
pub use mip::{solve_mip, MipError, MipOptions, MipProblem, MipResult, MipStatus};
pub use mps::{export_mps, read_mps, write_mps};

use crate::milp::MilpModel;

/// Solves `model` to the gap in `options`. Big-M coefficients are tightened
/// first so that row tolerances stay at the scale of the physical terms.
pub fn solve_milp(model: &MilpModel, options: &MipOptions) -> Result<MipResult, MipError> {
    solve_mip(&model.to_mip().tightened(), options)
}
