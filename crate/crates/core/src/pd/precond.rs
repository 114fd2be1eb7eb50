use super::{estimate_opnorm, SegProblem};
use crate::{Error, Result};

/// Diagonal primal and dual step sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct Preconditioner {
    pub tau: Vec<f64>,
    pub sigma: Vec<f64>,
}

/// Step-size choice handed to the solver.
#[derive(Clone, Debug)]
pub enum Steps {
    Diagonal(Preconditioner),
    /// Constant steps; checked against a power-iteration estimate of `‖K‖`.
    Scalar { tau: f64, sigma: f64 },
}

const FLOOR: f64 = 1e-8;

/// `1/τ(x) = L_T/γ + r Σ_i |K_{i,x}|` and `1/σ(i) = L_G*(i)/δ + (1/r) Σ_x |K_{i,x}|`.
/// Rows or columns with zero sum are floored at `1e-8·(N/r)` (dual) and
/// `1e-8·(N·r)` (primal).
pub fn build_preconditioner<P: SegProblem + ?Sized>(problem: &P, r: f64, delta: f64, gamma: f64) -> Result<Preconditioner> {
    if !(r.is_finite() && r > 0.0) {
        return Err(Error::InvalidParameter(format!("preconditioner scaling r must be positive, got {r}")));
    }
    if !(delta > 0.0 && delta < 2.0) || !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "preconditioner slots must lie in (0, 2), got delta={delta}, gamma={gamma}"
        )));
    }
    let n = problem.floor_scale();
    let lt = problem.lipschitz_t();
    let lg = problem.lipschitz_gstar_rows();
    let tau = problem
        .abs_col_sums()
        .into_iter()
        .map(|s| 1.0 / (lt / gamma + r * s).max(FLOOR * n * r))
        .collect();
    let sigma = problem
        .abs_row_sums()
        .into_iter()
        .zip(lg)
        .map(|(s, lg)| 1.0 / (lg / delta + s / r).max(FLOOR * n / r))
        .collect();
    Ok(Preconditioner { tau, sigma })
}

impl Steps {
    pub(crate) fn resolve<P: SegProblem + ?Sized>(self, problem: &P) -> Result<Preconditioner> {
        match self {
            Steps::Diagonal(p) => {
                if p.tau.len() != problem.primal_dim() || p.sigma.len() != problem.dual_dim() {
                    return Err(Error::DimensionMismatch("preconditioner does not match the problem".into()));
                }
                if p.tau.iter().chain(&p.sigma).any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::InvalidParameter("step sizes must be finite and positive".into()));
                }
                Ok(p)
            }
            Steps::Scalar { tau, sigma } => {
                if !(tau > 0.0 && sigma > 0.0 && tau.is_finite() && sigma.is_finite()) {
                    return Err(Error::InvalidParameter("step sizes must be finite and positive".into()));
                }
                let k = estimate_opnorm(
                    |u, o| problem.apply_k(u, o),
                    |p, o| problem.apply_kt(p, o),
                    problem.primal_dim(),
                    problem.dual_dim(),
                    100,
                );
                let a = 1.0 / tau - problem.lipschitz_t();
                let b = 1.0 / sigma - problem.lipschitz_gstar();
                if a <= 0.0 || b <= 0.0 || a * b < k * k {
                    return Err(Error::InvalidParameter(format!(
                        "steps tau={tau}, sigma={sigma} violate the convergence condition (‖K‖ ≈ {k:.4})"
                    )));
                }
                Ok(Preconditioner { tau: vec![tau; problem.primal_dim()], sigma: vec![sigma; problem.dual_dim()] })
            }
        }
    }
}
