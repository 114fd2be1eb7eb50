use std::time::{Duration, Instant};

use super::{Preconditioner, SegProblem, Steps};
use crate::util::norm;
use crate::{Error, Result};

/// Progress callbacks and energy samples happen every this many iterations.
pub const PROGRESS_EVERY: usize = 10;

/// Receives `(iteration, residual)` every [`PROGRESS_EVERY`] iterations;
/// returning `false` cancels the solve.
pub trait Monitor {
    fn report(&mut self, iteration: usize, residual: f64) -> bool;
}

impl<F: FnMut(usize, f64) -> bool> Monitor for F {
    fn report(&mut self, iteration: usize, residual: f64) -> bool {
        self(iteration, residual)
    }
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Sample the primal energy every [`PROGRESS_EVERY`] iterations.
    pub trace_energy: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { tol: 1e-6, max_iter: 5000, trace_energy: false }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveReport {
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Normalized fixed-point residual after every iteration.
    pub residual_trace: Vec<f64>,
    /// `(iteration, energy)` samples.
    pub energy_trace: Vec<(usize, f64)>,
    pub converged: bool,
    pub wall_time: Duration,
}

impl SolveReport {
    pub fn residual(&self) -> f64 {
        self.primal_residual + self.dual_residual
    }
}

#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub primal: Vec<f64>,
    pub dual: Vec<f64>,
    pub report: SolveReport,
}

const EPS: f64 = 1e-12;

/// Runs `u⁺ = prox_{τR}(u − τ(Kᵀp + ∇T(u)))`,
/// `p⁺ = prox_{σF*}(p + σ(K(2u⁺ − u) − ∇G*(p)))` until
/// `‖u⁺−u‖/(τ̄‖u‖+ε) + ‖p⁺−p‖/(σ̄‖p‖+ε) ≤ tol` or `max_iter` iterations.
pub fn solve<P: SegProblem + ?Sized>(
    problem: &P,
    steps: Steps,
    init: Option<(Vec<f64>, Vec<f64>)>,
    options: &SolveOptions,
    mut monitor: Option<&mut dyn Monitor>,
) -> Result<SolveOutput> {
    let start = Instant::now();
    let Preconditioner { tau, sigma } = steps.resolve(problem)?;
    let (nu, np) = (problem.primal_dim(), problem.dual_dim());
    let (mut u, mut p) = init.unwrap_or_else(|| (problem.initial_primal(), problem.initial_dual()));
    if u.len() != nu || p.len() != np {
        return Err(Error::DimensionMismatch("initial iterate does not match the problem".into()));
    }
    let tau_bar = tau.iter().sum::<f64>() / nu.max(1) as f64;
    let sigma_bar = sigma.iter().sum::<f64>() / np.max(1) as f64;

    let mut kt = vec![0.0; nu];
    let mut gt = vec![0.0; nu];
    let mut u_new = vec![0.0; nu];
    let mut ubar = vec![0.0; nu];
    let mut kb = vec![0.0; np];
    let mut gg = vec![0.0; np];
    let mut p_new = vec![0.0; np];
    let mut du = vec![0.0; nu];
    let mut dp = vec![0.0; np];

    let mut report = SolveReport::default();
    if options.trace_energy {
        if let Some(e) = problem.primal_energy(&u) {
            report.energy_trace.push((0, e));
        }
    }
    problem.apply_kt(&p, &mut kt);
    for it in 1..=options.max_iter {
        problem.grad_t(&u, &mut gt);
        for (((o, v), t), (k, g)) in u_new.iter_mut().zip(&u).zip(&tau).zip(kt.iter().zip(&gt)) {
            *o = v - t * (k + g);
        }
        problem.prox_r(&mut u_new, &tau);
        for ((b, n), v) in ubar.iter_mut().zip(&u_new).zip(&u) {
            *b = 2.0 * n - v;
        }
        problem.apply_k(&ubar, &mut kb);
        problem.grad_gstar(&p, &mut gg);
        for (((o, v), s), (k, g)) in p_new.iter_mut().zip(&p).zip(&sigma).zip(kb.iter().zip(&gg)) {
            *o = v + s * (k - g);
        }
        problem.prox_fstar(&mut p_new, &sigma);

        if u_new.iter().chain(&p_new).any(|v| !v.is_finite()) {
            return Err(Error::Diverged(it));
        }
        for ((d, n), v) in du.iter_mut().zip(&u_new).zip(&u) {
            *d = n - v;
        }
        for ((d, n), v) in dp.iter_mut().zip(&p_new).zip(&p) {
            *d = n - v;
        }
        let rp = norm(&du) / (tau_bar * norm(&u) + EPS);
        let rd = norm(&dp) / (sigma_bar * norm(&p) + EPS);
        std::mem::swap(&mut u, &mut u_new);
        std::mem::swap(&mut p, &mut p_new);
        problem.apply_kt(&p, &mut kt);

        report.iterations = it;
        report.primal_residual = rp;
        report.dual_residual = rd;
        report.residual_trace.push(rp + rd);
        let done = rp + rd <= options.tol;
        if it % super::PROGRESS_EVERY == 0 || done {
            if options.trace_energy {
                if let Some(e) = problem.primal_energy(&u) {
                    report.energy_trace.push((it, e));
                }
            }
            if let Some(m) = monitor.as_deref_mut() {
                if it % super::PROGRESS_EVERY == 0 && !m.report(it, rp + rd) {
                    return Err(Error::Cancelled);
                }
            }
        }
        if done {
            report.converged = true;
            break;
        }
    }
    report.wall_time = start.elapsed();
    Ok(SolveOutput { primal: u, dual: p, report })
}
