//! Matrix-free preconditioned primal-dual engine for saddle problems
//! `min_u max_p ⟨Ku, p⟩ + R(u) + T(u) − F*(p) − G*(p)`, together with the
//! grid finite differences and the projections used by the models.

mod grid;
mod opnorm;
mod precond;
mod problem;
mod project;
mod solver;

pub use grid::{div, div_into, grad, grad_into, GRAD_NORM_BOUND};
pub use opnorm::estimate_opnorm;
pub use precond::{build_preconditioner, Preconditioner, Steps};
pub use problem::SegProblem;
pub use project::{project_box, project_linf2_ball, project_linf_ball, project_nonneg, project_simplex};
pub use solver::{solve, Monitor, SolveOptions, SolveOutput, SolveReport, PROGRESS_EVERY};
