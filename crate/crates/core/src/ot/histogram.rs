use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Nonnegative vector of bin masses. The total mass is not prescribed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    bins: Vec<f64>,
}

impl Histogram {
    pub fn new(bins: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = bins.iter().enumerate().find(|(_, v)| !v.is_finite() || **v < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "histogram bin {i} has invalid mass {v}"
            )));
        }
        Ok(Self { bins })
    }

    /// Builds a histogram, clamping tiny negative round-off to zero.
    pub(crate) fn from_clamped(mut bins: Vec<f64>) -> Self {
        for v in &mut bins {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Self { bins }
    }

    pub fn zeros(len: usize) -> Self {
        Self { bins: vec![0.0; len] }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.bins
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.bins
    }

    pub fn total_mass(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Rescales to unit mass. Fails on an empty (zero-mass) histogram.
    pub fn normalized(&self) -> Result<Self> {
        let m = self.total_mass();
        if m <= 0.0 {
            return Err(Error::InvalidParameter("cannot normalize a zero-mass histogram".into()));
        }
        Ok(Self { bins: self.bins.iter().map(|v| v / m).collect() })
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self::from_clamped(self.bins.iter().map(|v| v * factor).collect())
    }
}

impl std::ops::Index<usize> for Histogram {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.bins[i]
    }
}

/// Transport plan between a source and a target histogram.
#[derive(Clone, Debug)]
pub struct TransportPlan {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<f64>,
    pub source_marginal: Histogram,
    pub target_marginal: Histogram,
}

impl TransportPlan {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.cols + j]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.cols.max(1)).take(self.rows).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for row in self.entries.chunks(self.cols.max(1)).take(self.rows) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    /// `‖P1 − a‖₁ + ‖Pᵀ1 − b‖₁`.
    pub fn marginal_residual(&self) -> f64 {
        let r: f64 = self
            .row_sums()
            .iter()
            .zip(self.source_marginal.as_slice())
            .map(|(s, a)| (s - a).abs())
            .sum();
        let c: f64 = self
            .col_sums()
            .iter()
            .zip(self.target_marginal.as_slice())
            .map(|(s, b)| (s - b).abs())
            .sum();
        r + c
    }

    /// `⟨P, C⟩` for a cost laid out like the plan.
    pub fn cost(&self, cost: &[f64]) -> f64 {
        self.entries.iter().zip(cost).map(|(p, c)| p * c).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_negative_and_nan() {
        assert!(Histogram::new(vec![1.0, -0.1]).is_err());
        assert!(Histogram::new(vec![f64::NAN]).is_err());
        assert!(Histogram::new(vec![0.0, 2.0]).is_ok());
    }

    #[test]
    fn total_mass_tracks_entries() {
        let h = Histogram::new(vec![1.0, 2.5, 0.5]).unwrap();
        assert_eq!(h.total_mass(), 4.0);
        let n = h.normalized().unwrap();
        assert!((n.total_mass() - 1.0).abs() < 1e-15);
        assert!(Histogram::zeros(3).normalized().is_err());
    }
}
