use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Ground cost between two bin centroids at Euclidean distance `d`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CostKind {
    /// `d^p`.
    EuclideanPower { p: f64 },
    /// `1 − exp(−γ d)`.
    ExpConcave { gamma: f64 },
}

impl CostKind {
    fn eval(&self, d: f64) -> f64 {
        match *self {
            CostKind::EuclideanPower { p } => d.powf(p),
            CostKind::ExpConcave { gamma } => 1.0 - (-gamma * d).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            CostKind::EuclideanPower { p } if !(p.is_finite() && p > 0.0) => {
                Err(Error::InvalidParameter(format!("cost exponent must be positive, got {p}")))
            }
            CostKind::ExpConcave { gamma } if !(gamma.is_finite() && gamma > 0.0) => {
                Err(Error::InvalidParameter(format!("cost gamma must be positive, got {gamma}")))
            }
            _ => Ok(()),
        }
    }
}

/// Nonnegative ground-cost matrix, possibly rectangular.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn from_entries(rows: usize, cols: usize, entries: Vec<f64>) -> Result<Self> {
        if rows * cols != entries.len() {
            return Err(Error::DimensionMismatch(format!(
                "cost matrix {rows}x{cols} needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        if entries.iter().any(|c| !c.is_finite() || *c < 0.0) {
            return Err(Error::InvalidParameter("cost entries must be finite and nonnegative".into()));
        }
        Ok(Self { rows, cols, entries })
    }

    /// `2(1 − δ_ij)`: with this cost the transport cost equals the ℓ1 distance.
    pub fn l1(m: usize) -> Self {
        let mut entries = vec![2.0; m * m];
        for i in 0..m {
            entries[i * m + i] = 0.0;
        }
        Self { rows: m, cols: m, entries }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.cols..(i + 1) * self.cols]
    }

    pub fn max(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Self {
        let mut entries = vec![0.0; self.entries.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                entries[j * self.rows + i] = self.entries[i * self.cols + j];
            }
        }
        Self { rows: self.cols, cols: self.rows, entries }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { rows: self.rows, cols: self.cols, entries: self.entries.iter().map(|c| c * factor).collect() }
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Cost between every `src` and `dst` centroid. With `normalize` the result
/// is divided by its largest entry (left unchanged if every entry is zero).
pub fn build_cost_matrix(
    src: &[Vec<f64>],
    dst: &[Vec<f64>],
    kind: CostKind,
    normalize: bool,
) -> Result<CostMatrix> {
    kind.validate()?;
    if src.is_empty() || dst.is_empty() {
        return Err(Error::InvalidParameter("cost matrix needs at least one centroid per side".into()));
    }
    let dim = src[0].len();
    if src.iter().chain(dst).any(|c| c.len() != dim) {
        return Err(Error::DimensionMismatch("centroids have differing dimensions".into()));
    }
    let mut entries = Vec::with_capacity(src.len() * dst.len());
    for a in src {
        for b in dst {
            entries.push(kind.eval(distance(a, b)));
        }
    }
    let mut cost = CostMatrix::from_entries(src.len(), dst.len(), entries)?;
    if normalize {
        let max = cost.max();
        if max > 0.0 {
            cost = cost.scaled(1.0 / max);
        }
    }
    Ok(cost)
}

/// `2 / median` of the pairwise centroid distances, the default steepness of
/// the concave cost. Falls back to 1 when all centroids coincide.
pub fn default_exp_gamma(centroids: &[Vec<f64>]) -> f64 {
    let mut d = Vec::new();
    for i in 0..centroids.len() {
        for j in i + 1..centroids.len() {
            d.push(distance(&centroids[i], &centroids[j]));
        }
    }
    if d.is_empty() {
        return 1.0;
    }
    d.sort_by(f64::total_cmp);
    let mid = d.len() / 2;
    let median = if d.len() % 2 == 1 { d[mid] } else { 0.5 * (d[mid - 1] + d[mid]) };
    if median > 0.0 {
        2.0 / median
    } else {
        1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn euclidean_square_is_symmetric_with_zero_diagonal() {
        let c = vec![vec![0.0, 0.0], vec![3.0, 4.0], vec![1.0, 0.0]];
        let m = build_cost_matrix(&c, &c, CostKind::EuclideanPower { p: 1.0 }, false).unwrap();
        assert_eq!(m.get(0, 1), 5.0);
        assert_eq!(m.get(1, 0), 5.0);
        for i in 0..3 {
            assert_eq!(m.get(i, i), 0.0);
        }
        let n = build_cost_matrix(&c, &c, CostKind::EuclideanPower { p: 2.0 }, true).unwrap();
        assert_eq!(n.max(), 1.0);
        assert!((n.get(1, 2) - 20.0 / 25.0).abs() < 1e-15);
    }

    #[test]
    fn rectangular_and_transpose() {
        let a = vec![vec![0.0], vec![1.0]];
        let b = vec![vec![0.5], vec![2.0], vec![4.0]];
        let m = build_cost_matrix(&a, &b, CostKind::ExpConcave { gamma: 1.0 }, false).unwrap();
        assert_eq!((m.rows(), m.cols()), (2, 3));
        let t = m.transpose();
        assert_eq!(t.get(2, 1), m.get(1, 2));
        assert!((m.get(0, 2) - (1.0 - (-4.0f64).exp())).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_parameters() {
        let a = vec![vec![0.0]];
        assert!(build_cost_matrix(&a, &a, CostKind::EuclideanPower { p: 0.0 }, false).is_err());
        assert!(build_cost_matrix(&a, &[vec![0.0, 1.0]], CostKind::EuclideanPower { p: 1.0 }, false).is_err());
        assert!(CostMatrix::from_entries(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn gamma_from_median() {
        let c = vec![vec![0.0], vec![1.0], vec![3.0]];
        // distances 1, 3, 2 -> median 2
        assert_eq!(default_exp_gamma(&c), 1.0);
    }
}
