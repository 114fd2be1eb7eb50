use super::CostMatrix;
use crate::{Error, Result};

/// Dual variable `β = (x, y)` paired with a histogram pair `(α₁, α₂)`.
#[derive(Clone, Debug, PartialEq)]
pub struct DualPotentials {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DualPotentials {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }
}

/// `(Lβ)_{ij} = x_i + y_j`, row-major.
pub fn apply_l(beta: &DualPotentials) -> Vec<f64> {
    beta.x.iter().flat_map(|xi| beta.y.iter().map(move |yj| xi + yj)).collect()
}

/// `Lᵀr = (r1, rᵀ1)`: row sums followed by column sums.
pub fn apply_l_transpose(r: &[f64], rows: usize, cols: usize) -> DualPotentials {
    assert_eq!(r.len(), rows * cols);
    let mut x = vec![0.0; rows];
    let mut y = vec![0.0; cols];
    for i in 0..rows {
        for j in 0..cols {
            let v = r[i * cols + j];
            x[i] += v;
            y[j] += v;
        }
    }
    DualPotentials { x, y }
}

/// `q = exp(λ(Lβ − c) − 1)` summarized as `q = e^shift · q̃` with row and
/// column sums of `q̃` and its total.
pub(crate) struct ConjStats {
    pub shift: f64,
    pub rows: Vec<f64>,
    pub cols: Vec<f64>,
    pub total: f64,
}

impl ConjStats {
    pub fn compute(x: &[f64], y: &[f64], cost: &CostMatrix, lambda: f64) -> Self {
        let n = y.len();
        let c = cost.as_slice();
        let mut shift = f64::NEG_INFINITY;
        for (i, xi) in x.iter().enumerate() {
            for (j, yj) in y.iter().enumerate() {
                shift = shift.max(xi + yj - c[i * n + j]);
            }
        }
        shift = lambda * shift - 1.0;
        let mut rows = vec![0.0; x.len()];
        let mut cols = vec![0.0; n];
        for (i, xi) in x.iter().enumerate() {
            let row = &c[i * n..(i + 1) * n];
            let mut acc = 0.0;
            for ((yj, cij), col) in y.iter().zip(row).zip(cols.iter_mut()) {
                let q = (lambda * (xi + yj - cij) - 1.0 - shift).exp();
                acc += q;
                *col += q;
            }
            rows[i] = acc;
        }
        let total = rows.iter().sum();
        Self { shift, rows, cols, total }
    }

    /// `ln ⟨q, 1⟩`.
    pub fn log_mass(&self) -> f64 {
        self.shift + self.total.ln()
    }

    pub fn value(&self, lambda: f64, n: f64) -> f64 {
        let ls = self.log_mass();
        if ls <= 0.0 {
            n / lambda * ls.exp()
        } else {
            n / lambda * (ls + 1.0)
        }
    }

    /// Writes the gradient with respect to `x` and `y`.
    pub fn grad_into(&self, n: f64, gx: &mut [f64], gy: &mut [f64]) {
        let scale = if self.log_mass() <= 0.0 { n * self.shift.exp() } else { n / self.total };
        for (g, r) in gx.iter_mut().zip(&self.rows) {
            *g = scale * r;
        }
        for (g, c) in gy.iter_mut().zip(&self.cols) {
            *g = scale * c;
        }
    }
}

fn check(beta: &DualPotentials, cost: &CostMatrix, lambda: f64, n: f64) -> Result<()> {
    if beta.x.len() != cost.rows() || beta.y.len() != cost.cols() {
        return Err(Error::DimensionMismatch(format!(
            "dual of length {}+{} against a {}x{} cost",
            beta.x.len(),
            beta.y.len(),
            cost.rows(),
            cost.cols()
        )));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    if !(n.is_finite() && n > 0.0) {
        return Err(Error::InvalidParameter(format!("mass bound must be positive, got {n}")));
    }
    Ok(())
}

/// Conjugate of the entropic transport cost restricted to masses at most `n`:
/// with `s = ⟨exp(λ(Lβ − c) − 1), 1⟩` it is `(n/λ)s` for `s ≤ 1` and
/// `(n/λ)(ln s + 1)` otherwise.
pub fn mk_conj_value(beta: &DualPotentials, cost: &CostMatrix, lambda: f64, n: f64) -> Result<f64> {
    check(beta, cost, lambda, n)?;
    Ok(ConjStats::compute(&beta.x, &beta.y, cost, lambda).value(lambda, n))
}

/// Gradient of [`mk_conj_value`], returned as the primal histogram pair.
pub fn mk_conj_grad(beta: &DualPotentials, cost: &CostMatrix, lambda: f64, n: f64) -> Result<DualPotentials> {
    check(beta, cost, lambda, n)?;
    let stats = ConjStats::compute(&beta.x, &beta.y, cost, lambda);
    let mut gx = vec![0.0; beta.x.len()];
    let mut gy = vec![0.0; beta.y.len()];
    stats.grad_into(n, &mut gx, &mut gy);
    Ok(DualPotentials { x: gx, y: gy })
}
