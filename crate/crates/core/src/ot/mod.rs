//! Transport-cost mathematics: cost matrices, the exact Monge-Kantorovich
//! linear program, entropic (Sinkhorn) transport, the regularized conjugate
//! and its gradient, and the Lambert-W proximity operator.
//!
//! Plans and cost matrices are stored row-major: entry `(i, j)` sits at
//! `i * cols + j`, rows indexing the source histogram and columns the target.

pub(crate) mod conjugate;
mod cost;
mod exact;
mod histogram;
mod lambert;
mod sinkhorn;

pub use conjugate::{apply_l, apply_l_transpose, mk_conj_grad, mk_conj_value, DualPotentials};
pub use cost::{build_cost_matrix, default_exp_gamma, CostKind, CostMatrix};
pub use exact::{mk_exact, MAX_EXACT_BINS};
pub use histogram::{Histogram, TransportPlan};
pub use lambert::{lambert_w, lambert_w_exp, prox_g_lambda, prox_g_lambda_entry};
pub use sinkhorn::{sinkhorn, SinkhornDomain, SinkhornOptions, SinkhornResult};

/// Relative tolerance used to decide that two histogram masses are equal.
pub const MASS_TOLERANCE: f64 = 1e-9;

pub(crate) fn check_equal_mass(ma: f64, mb: f64) -> crate::Result<()> {
    let scale = ma.abs().max(mb.abs());
    if (ma - mb).abs() > MASS_TOLERANCE * scale {
        return Err(crate::Error::MassMismatch(ma, mb));
    }
    Ok(())
}
