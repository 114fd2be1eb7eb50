/// A saddle problem `min_u max_p ⟨Ku, p⟩ + R(u) + T(u) − F*(p) − G*(p)`
/// described through matrix-free callbacks. `R` and `F*` enter through
/// their resolvents with per-entry steps, `T` and `G*` through gradients.
pub trait SegProblem: Sync {
    fn primal_dim(&self) -> usize;
    fn dual_dim(&self) -> usize;

    /// `out = Ku`.
    fn apply_k(&self, u: &[f64], out: &mut [f64]);
    /// `out = Kᵀp`.
    fn apply_kt(&self, p: &[f64], out: &mut [f64]);

    /// In-place `prox_{τR}` with a diagonal step.
    fn prox_r(&self, u: &mut [f64], tau: &[f64]);
    /// In-place `prox_{σF*}` with a diagonal step.
    fn prox_fstar(&self, p: &mut [f64], sigma: &[f64]);

    fn grad_t(&self, _u: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn lipschitz_t(&self) -> f64 {
        0.0
    }
    fn grad_gstar(&self, _p: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn lipschitz_gstar(&self) -> f64 {
        0.0
    }
    /// Lipschitz constant seen by each dual row. When `G*` is separable
    /// across dual blocks, rows it does not depend on may report 0.
    fn lipschitz_gstar_rows(&self) -> Vec<f64> {
        vec![self.lipschitz_gstar(); self.dual_dim()]
    }

    /// `Σ_x |K_{i,x}|` per dual row; upper bounds are acceptable.
    fn abs_row_sums(&self) -> Vec<f64>;
    /// `Σ_i |K_{i,x}|` per primal column; upper bounds are acceptable.
    fn abs_col_sums(&self) -> Vec<f64>;

    /// Scale `N` of the step floor for empty rows and columns.
    fn floor_scale(&self) -> f64 {
        self.primal_dim() as f64
    }

    fn initial_primal(&self) -> Vec<f64> {
        vec![0.0; self.primal_dim()]
    }

    fn initial_dual(&self) -> Vec<f64> {
        vec![0.0; self.dual_dim()]
    }

    /// Primal objective, when the model can evaluate it.
    fn primal_energy(&self, _u: &[f64]) -> Option<f64> {
        None
    }
}
