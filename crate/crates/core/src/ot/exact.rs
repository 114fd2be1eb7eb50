use super::{check_equal_mass, CostMatrix, Histogram, TransportPlan};
use crate::{Error, Result};

/// Largest histogram length accepted by [`mk_exact`].
pub const MAX_EXACT_BINS: usize = 4096;

/// Exact transport cost `min ⟨P, C⟩` over plans with marginals `a` and `b`,
/// solved with the transportation simplex. The masses must agree to a
/// relative tolerance of [`super::MASS_TOLERANCE`].
pub fn mk_exact(a: &Histogram, b: &Histogram, cost: &CostMatrix) -> Result<(f64, TransportPlan)> {
    if a.len() != cost.rows() || b.len() != cost.cols() {
        return Err(Error::DimensionMismatch(format!(
            "histograms of length {} and {} against a {}x{} cost",
            a.len(),
            b.len(),
            cost.rows(),
            cost.cols()
        )));
    }
    if a.len() > MAX_EXACT_BINS || b.len() > MAX_EXACT_BINS {
        return Err(Error::TooLarge(format!(
            "exact transport limited to {MAX_EXACT_BINS} bins per side"
        )));
    }
    check_equal_mass(a.total_mass(), b.total_mass())?;

    let (m, n) = (a.len(), b.len());
    let mut entries = vec![0.0; m * n];
    let rows: Vec<usize> = (0..m).filter(|&i| a[i] > 0.0).collect();
    let cols: Vec<usize> = (0..n).filter(|&j| b[j] > 0.0).collect();
    let mut total = 0.0;
    if !rows.is_empty() && !cols.is_empty() {
        let sub_cost: Vec<f64> =
            rows.iter().flat_map(|&i| cols.iter().map(move |&j| cost.get(i, j))).collect();
        let supply: Vec<f64> = rows.iter().map(|&i| a[i]).collect();
        let demand: Vec<f64> = cols.iter().map(|&j| b[j]).collect();
        let mut simplex = Simplex::new(&supply, &demand, &sub_cost);
        simplex.solve()?;
        for (&(i, j), &f) in simplex.cells.iter().zip(&simplex.flow) {
            if f > 0.0 {
                let (gi, gj) = (rows[i], cols[j]);
                entries[gi * n + gj] = f;
                total += f * cost.get(gi, gj);
            }
        }
    }
    Ok((
        total,
        TransportPlan { rows: m, cols: n, entries, source_marginal: a.clone(), target_marginal: b.clone() },
    ))
}

/// Basis-tree state. Nodes `0..m` are sources, `m..m+n` are targets; each
/// basic cell is an edge of a spanning tree over the nodes.
struct Simplex<'a> {
    m: usize,
    n: usize,
    cost: &'a [f64],
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    adj: Vec<Vec<usize>>,
    u: Vec<f64>,
    v: Vec<f64>,
    cursor: usize,
    eps: f64,
    // scratch for tree walks
    parent: Vec<Option<usize>>,
    seen: Vec<bool>,
    stack: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn new(supply: &[f64], demand: &[f64], cost: &'a [f64]) -> Self {
        let (m, n) = (supply.len(), demand.len());
        let mut s = supply.to_vec();
        let mut d = demand.to_vec();
        let mut cells = Vec::with_capacity(m + n - 1);
        let mut flow = Vec::with_capacity(m + n - 1);
        // Northwest corner: exactly m + n − 1 cells forming a staircase tree.
        let (mut i, mut j) = (0, 0);
        loop {
            let q = s[i].min(d[j]);
            cells.push((i, j));
            flow.push(q);
            s[i] -= q;
            d[j] -= q;
            if i == m - 1 && j == n - 1 {
                break;
            }
            if i == m - 1 {
                j += 1;
            } else if j == n - 1 || s[i] <= d[j] {
                i += 1;
            } else {
                j += 1;
            }
        }
        let mut adj = vec![Vec::new(); m + n];
        for (k, &(i, j)) in cells.iter().enumerate() {
            adj[i].push(k);
            adj[m + j].push(k);
        }
        let cmax = cost.iter().copied().fold(0.0, f64::max);
        Self {
            m,
            n,
            cost,
            cells,
            flow,
            adj,
            u: vec![0.0; m],
            v: vec![0.0; n],
            cursor: 0,
            eps: 1e-10 * cmax.max(f64::MIN_POSITIVE),
            parent: vec![None; m + n],
            seen: vec![false; m + n],
            stack: Vec::new(),
        }
    }

    fn solve(&mut self) -> Result<()> {
        let max_pivots = 50 * self.m * self.n + 1000;
        for _ in 0..max_pivots {
            self.potentials();
            let Some((i, j)) = self.entering() else {
                return Ok(());
            };
            self.pivot(i, j);
        }
        self.potentials();
        let residual = self.entering().map_or(0.0, |(i, j)| -self.reduced(i, j));
        Err(Error::NotConverged { iterations: max_pivots, residual })
    }

    fn reduced(&self, i: usize, j: usize) -> f64 {
        self.cost[i * self.n + j] - self.u[i] - self.v[j]
    }

    fn potentials(&mut self) {
        let m = self.m;
        self.seen.fill(false);
        self.u[0] = 0.0;
        self.seen[0] = true;
        self.stack.clear();
        self.stack.push(0);
        while let Some(node) = self.stack.pop() {
            for &k in &self.adj[node] {
                let (i, j) = self.cells[k];
                let c = self.cost[i * self.n + j];
                if node < m {
                    if !self.seen[m + j] {
                        self.v[j] = c - self.u[i];
                        self.seen[m + j] = true;
                        self.stack.push(m + j);
                    }
                } else if !self.seen[i] {
                    self.u[i] = c - self.v[j];
                    self.seen[i] = true;
                    self.stack.push(i);
                }
            }
        }
    }

    /// Block pricing: scan cells cyclically and return the most negative
    /// reduced cost of the first block containing one.
    fn entering(&mut self) -> Option<(usize, usize)> {
        let total = self.m * self.n;
        let block = ((total as f64).sqrt() as usize).max(16);
        let mut best = -self.eps;
        let mut found = None;
        let mut scanned = 0;
        while scanned < total {
            let k = self.cursor;
            self.cursor = if k + 1 == total { 0 } else { k + 1 };
            let (i, j) = (k / self.n, k % self.n);
            let rc = self.reduced(i, j);
            if rc < best {
                best = rc;
                found = Some((i, j));
            }
            scanned += 1;
            if found.is_some() && scanned % block == 0 {
                break;
            }
        }
        found
    }

    fn pivot(&mut self, i: usize, j: usize) {
        let m = self.m;
        // Tree path from target node j to source node i.
        self.parent.fill(None);
        self.seen.fill(false);
        self.stack.clear();
        self.stack.push(m + j);
        self.seen[m + j] = true;
        while let Some(node) = self.stack.pop() {
            if node == i {
                break;
            }
            for &k in &self.adj[node] {
                let (ci, cj) = self.cells[k];
                let other = if node < m { m + cj } else { ci };
                if !self.seen[other] {
                    self.seen[other] = true;
                    self.parent[other] = Some(k);
                    self.stack.push(other);
                }
            }
        }
        let mut path = Vec::new();
        let mut node = i;
        while node != m + j {
            let k = self.parent[node].expect("basis is a spanning tree");
            path.push(k);
            let (ci, cj) = self.cells[k];
            node = if node < m { m + cj } else { ci };
        }
        path.reverse();

        // Even positions (from the target end) lose flow, odd ones gain it.
        let mut leave = 0;
        let mut theta = f64::INFINITY;
        for (pos, &k) in path.iter().enumerate().step_by(2) {
            if self.flow[k] < theta {
                theta = self.flow[k];
                leave = pos;
            }
        }
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                self.flow[k] -= theta;
            } else {
                self.flow[k] += theta;
            }
        }
        let slot = path[leave];
        let (li, lj) = self.cells[slot];
        self.adj[li].retain(|&k| k != slot);
        self.adj[m + lj].retain(|&k| k != slot);
        self.cells[slot] = (i, j);
        self.flow[slot] = theta;
        self.adj[i].push(slot);
        self.adj[m + j].push(slot);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Minimum cost over all integer plans, by exhaustive enumeration.
    fn enumerate_min(a: &[u32], b: &[u32], c: &[f64]) -> f64 {
        fn rec(k: usize, rows: &mut [u32], cols: &mut [u32], c: &[f64], acc: f64, best: &mut f64) {
            let n = cols.len();
            if k == rows.len() * n {
                if rows.iter().all(|&r| r == 0) && cols.iter().all(|&r| r == 0) {
                    *best = best.min(acc);
                }
                return;
            }
            let (i, j) = (k / n, k % n);
            // The last cell of a row must absorb the remaining supply.
            let hi = rows[i].min(cols[j]);
            let lo = if j == n - 1 { rows[i] } else { 0 };
            if lo > hi {
                return;
            }
            for q in lo..=hi {
                rows[i] -= q;
                cols[j] -= q;
                rec(k + 1, rows, cols, c, acc + q as f64 * c[k], best);
                rows[i] += q;
                cols[j] += q;
            }
        }
        let mut best = f64::INFINITY;
        rec(0, &mut a.to_vec(), &mut b.to_vec(), c, 0.0, &mut best);
        best
    }

    fn int_hist(len: usize, mass: u32) -> impl Strategy<Value = Vec<u32>> {
        proptest::collection::vec(0..=mass, len).prop_map(move |mut v| {
            // Redistribute so the total is exactly `mass`.
            let mut left = mass;
            for x in v.iter_mut() {
                *x = (*x).min(left);
                left -= *x;
            }
            *v.last_mut().unwrap() += left;
            v
        })
    }

    fn case() -> impl Strategy<Value = (Vec<u32>, Vec<u32>, Vec<f64>)> {
        (1usize..=3, 1usize..=3, 0u32..=6).prop_flat_map(|(m, n, mass)| {
            (int_hist(m, mass), int_hist(n, mass), proptest::collection::vec(0.0f64..10.0, m * n))
        })
    }

    proptest! {
        #[test]
        fn matches_enumeration((a, b, c) in case()) {
            let oracle = enumerate_min(&a, &b, &c);
            let ha = Histogram::new(a.iter().map(|&x| x as f64).collect()).unwrap();
            let hb = Histogram::new(b.iter().map(|&x| x as f64).collect()).unwrap();
            let cost = CostMatrix::from_entries(a.len(), b.len(), c).unwrap();
            let (value, plan) = mk_exact(&ha, &hb, &cost).unwrap();
            prop_assert!((value - oracle).abs() <= 1e-9 * (1.0 + oracle.abs()), "{value} vs {oracle}");
            prop_assert!(plan.entries.iter().all(|&p| p >= 0.0));
            prop_assert!(plan.marginal_residual() <= 1e-9);
        }

        #[test]
        fn l1_cost_gives_l1_distance(
            (a, b) in (2usize..12).prop_flat_map(|m| (
                proptest::collection::vec(0.0f64..1.0, m),
                proptest::collection::vec(0.0f64..1.0, m),
            ))
        ) {
            let sa: f64 = a.iter().sum();
            let sb: f64 = b.iter().sum();
            prop_assume!(sa > 1e-3 && sb > 1e-3);
            let b: Vec<f64> = b.iter().map(|x| x * sa / sb).collect();
            let ha = Histogram::new(a.clone()).unwrap();
            let hb = Histogram::new(b.clone()).unwrap();
            let (value, plan) = mk_exact(&ha, &hb, &CostMatrix::l1(a.len())).unwrap();
            let l1: f64 = a.iter().zip(&b).map(|(x, y)| (x - y).abs()).sum();
            prop_assert!((value - l1).abs() <= 1e-9 * (1.0 + l1), "{value} vs {l1}");
            prop_assert!(plan.marginal_residual() <= 1e-9 * sa.max(1.0));
        }
    }

    #[test]
    fn rejects_mass_mismatch_and_shape() {
        let a = Histogram::new(vec![1.0, 1.0]).unwrap();
        let b = Histogram::new(vec![1.0, 1.5]).unwrap();
        assert!(matches!(mk_exact(&a, &b, &CostMatrix::l1(2)), Err(Error::MassMismatch(..))));
        assert!(matches!(mk_exact(&a, &a, &CostMatrix::l1(3)), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn zero_mass_is_free() {
        let z = Histogram::zeros(3);
        let (v, plan) = mk_exact(&z, &z, &CostMatrix::l1(3)).unwrap();
        assert_eq!(v, 0.0);
        assert!(plan.entries.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn larger_instance_matches_transposed_problem() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let (m, n) = (40, 55);
        let a: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
        let s = a.iter().sum::<f64>() / b.iter().sum::<f64>();
        b.iter_mut().for_each(|x| *x *= s);
        let c: Vec<f64> = (0..m * n).map(|_| rng.random::<f64>()).collect();
        let cost = CostMatrix::from_entries(m, n, c).unwrap();
        let ha = Histogram::new(a).unwrap();
        let hb = Histogram::new(b).unwrap();
        let (value, plan) = mk_exact(&ha, &hb, &cost).unwrap();
        assert!(plan.marginal_residual() < 1e-9);
        // The transposed problem must reach the same optimum.
        let (vt, _) = mk_exact(&hb, &ha, &cost.transpose()).unwrap();
        assert!((value - vt).abs() < 1e-9);
    }
}
