use super::{check_equal_mass, CostMatrix, Histogram, TransportPlan};
use crate::{Error, Result};

/// Which parametrization of the scaling vectors to iterate in.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum SinkhornDomain {
    /// Plain scalings when `λ·max C ≤ 30`, log-domain otherwise.
    #[default]
    Auto,
    Plain,
    Log,
}

#[derive(Clone, Debug)]
pub struct SinkhornOptions {
    pub lambda: f64,
    /// Absolute ℓ1 marginal residual; defaults to `1e-9 · mass`.
    pub tol: Option<f64>,
    pub max_iter: usize,
    pub domain: SinkhornDomain,
    /// Fail with `NotConverged` when `max_iter` is hit; otherwise return the
    /// last iterate with its residual.
    pub strict: bool,
}

impl SinkhornOptions {
    pub fn new(lambda: f64) -> Self {
        Self { lambda, tol: None, max_iter: 10_000, domain: SinkhornDomain::Auto, strict: true }
    }
}

#[derive(Clone, Debug)]
pub struct SinkhornResult {
    /// `⟨P, C⟩ − h(P)/λ` with `h(P) = −⟨P, log P⟩`.
    pub reg_cost: f64,
    /// `⟨P, C⟩`.
    pub transport_cost: f64,
    pub entropy: f64,
    pub plan: TransportPlan,
    pub iterations: usize,
    pub residual: f64,
}

const PLAIN_EXPONENT_LIMIT: f64 = 30.0;

/// Entropy-regularized transport between equal-mass histograms by
/// alternating scaling. Empty bins are removed before iterating.
pub fn sinkhorn(a: &Histogram, b: &Histogram, cost: &CostMatrix, opts: &SinkhornOptions) -> Result<SinkhornResult> {
    if a.len() != cost.rows() || b.len() != cost.cols() {
        return Err(Error::DimensionMismatch(format!(
            "histograms of length {} and {} against a {}x{} cost",
            a.len(),
            b.len(),
            cost.rows(),
            cost.cols()
        )));
    }
    let lambda = opts.lambda;
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(Error::InvalidParameter(format!("lambda must be positive, got {lambda}")));
    }
    let mass = a.total_mass();
    check_equal_mass(mass, b.total_mass())?;
    let (m, n) = (a.len(), b.len());
    let tol = opts.tol.unwrap_or(1e-9 * mass);

    let rows: Vec<usize> = (0..m).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
    let mut entries = vec![0.0; m * n];
    let empty = |entries| SinkhornResult {
        reg_cost: 0.0,
        transport_cost: 0.0,
        entropy: 0.0,
        plan: TransportPlan { rows: m, cols: n, entries, source_marginal: a.clone(), target_marginal: b.clone() },
        iterations: 0,
        residual: 0.0,
    };
    if rows.is_empty() || cols.is_empty() {
        return Ok(empty(entries));
    }

    let sub = Sub {
        a: rows.iter().map(|&i| a[i]).collect(),
        b: cols.iter().map(|&j| b[j]).collect(),
        c: rows.iter().flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j))).collect(),
    };
    let cmax = sub.c.iter().copied().fold(0.0, f64::max);
    let use_log = match opts.domain {
        SinkhornDomain::Plain => false,
        SinkhornDomain::Log => true,
        SinkhornDomain::Auto => lambda * cmax > PLAIN_EXPONENT_LIMIT,
    };
    let (f, g, iterations, residual) =
        if use_log { sub.log_domain(lambda, tol, opts.max_iter)? } else { sub.plain(lambda, tol, opts.max_iter)? };
    if residual > tol && opts.strict {
        return Err(Error::NotConverged { iterations, residual });
    }

    // Assemble from log-scalings so log P is available exactly.
    let nc = cols.len();
    let (mut transport, mut entropy) = (0.0, 0.0);
    for (ri, &i) in rows.iter().enumerate() {
        for (cj, &j) in cols.iter().enumerate() {
            let c = sub.c[ri * nc + cj];
            let lp = f[ri] + g[cj] - lambda * c;
            let p = lp.exp();
            if p > 0.0 {
                entries[i * n + j] = p;
                transport += p * c;
                entropy -= p * lp;
            }
        }
    }
    Ok(SinkhornResult {
        reg_cost: transport - entropy / lambda,
        transport_cost: transport,
        entropy,
        plan: TransportPlan { rows: m, cols: n, entries, source_marginal: a.clone(), target_marginal: b.clone() },
        iterations,
        residual,
    })
}

struct Sub {
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
}

type Scalings = (Vec<f64>, Vec<f64>, usize, f64);

impl Sub {
    /// Returns log-scalings `(ln x, ln y)`.
    fn plain(&self, lambda: f64, tol: f64, max_iter: usize) -> Result<Scalings> {
        let (m, n) = (self.a.len(), self.b.len());
        let k: Vec<f64> = self.c.iter().map(|c| (-lambda * c).exp()).collect();
        let mut x = vec![1.0; m];
        let mut y = vec![1.0; n];
        let mut ky = vec![0.0; m];
        let mut ktx = vec![0.0; n];
        let mul = |y: &[f64], ky: &mut [f64]| {
            for (i, out) in ky.iter_mut().enumerate() {
                *out = k[i * n..(i + 1) * n].iter().zip(y).map(|(k, y)| k * y).sum();
            }
        };
        mul(&y, &mut ky);
        let mut residual = f64::INFINITY;
        let mut it = 0;
        while it < max_iter {
            it += 1;
            for i in 0..m {
                if !(ky[i] > 0.0 && ky[i].is_finite()) {
                    return Err(Error::NumericalUnderflow(format!("row {i} kernel sum vanished")));
                }
                x[i] = self.a[i] / ky[i];
            }
            ktx.fill(0.0);
            for i in 0..m {
                for (o, kv) in ktx.iter_mut().zip(&k[i * n..(i + 1) * n]) {
                    *o += kv * x[i];
                }
            }
            for j in 0..n {
                if !(ktx[j] > 0.0 && ktx[j].is_finite()) {
                    return Err(Error::NumericalUnderflow(format!("column {j} kernel sum vanished")));
                }
                y[j] = self.b[j] / ktx[j];
            }
            mul(&y, &mut ky);
            residual = x.iter().zip(&ky).zip(&self.a).map(|((x, s), a)| (x * s - a).abs()).sum();
            if residual <= tol {
                break;
            }
        }
        Ok((x.iter().map(|v| v.ln()).collect(), y.iter().map(|v| v.ln()).collect(), it, residual))
    }

    /// Log-domain scaling with λ-continuation: earlier stages at smaller λ
    /// warm-start the potentials `f/λ`, `g/λ` of the next.
    fn log_domain(&self, lambda: f64, tol: f64, max_iter: usize) -> Result<Scalings> {
        let (m, n) = (self.a.len(), self.b.len());
        let cmax = self.c.iter().copied().fold(0.0, f64::max);
        let mut stages = vec![lambda];
        if cmax > 0.0 {
            let mut l = lambda;
            while l * cmax > 4.0 * PLAIN_EXPONENT_LIMIT {
                l /= 4.0;
                stages.push(l);
            }
        }
        stages.reverse();
        let mut phi = vec![0.0; m];
        let mut psi = vec![0.0; n];
        let mut total = 0;
        let mut last = (vec![], vec![], 0.0);
        for (k, &l) in stages.iter().enumerate() {
            let final_stage = k + 1 == stages.len();
            let f = phi.iter().map(|v| v * l).collect();
            let g = psi.iter().map(|v| v * l).collect();
            let stage_tol = if final_stage { tol } else { tol.max(1e-6 * self.a.iter().sum::<f64>()) };
            let (f, g, it, res) = self.log_iterate(f, g, l, stage_tol, max_iter - total)?;
            total += it;
            phi = f.iter().map(|v| v / l).collect();
            psi = g.iter().map(|v| v / l).collect();
            last = (f, g, res);
            if total >= max_iter {
                break;
            }
        }
        let (f, g, res) = last;
        Ok((f, g, total, res))
    }

    fn log_iterate(
        &self,
        mut f: Vec<f64>,
        mut g: Vec<f64>,
        lambda: f64,
        tol: f64,
        max_iter: usize,
    ) -> Result<Scalings> {
        let (m, n) = (self.a.len(), self.b.len());
        let la: Vec<f64> = self.a.iter().map(|v| v.ln()).collect();
        let lb: Vec<f64> = self.b.iter().map(|v| v.ln()).collect();
        let mut buf = vec![0.0; m.max(n)];
        let mut residual = f64::INFINITY;
        let mut it = 0;
        while it < max_iter {
            it += 1;
            for i in 0..m {
                for j in 0..n {
                    buf[j] = g[j] - lambda * self.c[i * n + j];
                }
                f[i] = la[i] - log_sum_exp(&buf[..n]);
            }
            for j in 0..n {
                for i in 0..m {
                    buf[i] = f[i] - lambda * self.c[i * n + j];
                }
                g[j] = lb[j] - log_sum_exp(&buf[..m]);
            }
            residual = 0.0;
            for i in 0..m {
                for j in 0..n {
                    buf[j] = g[j] - lambda * self.c[i * n + j];
                }
                residual += ((f[i] + log_sum_exp(&buf[..n])).exp() - self.a[i]).abs();
            }
            if !residual.is_finite() {
                return Err(Error::NumericalUnderflow("log-domain scaling became non-finite".into()));
            }
            if residual <= tol {
                break;
            }
        }
        Ok((f, g, it, residual))
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
