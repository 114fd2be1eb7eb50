use serde::{Deserialize, Serialize};

use crate::ot::{build_cost_matrix, default_exp_gamma, CostKind, CostMatrix};
use crate::{Error, Result};

/// How the histogram dissimilarity is dualized.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    /// `‖h₁ − h₂‖₁` with an ℓ∞-ball dual.
    L1,
    /// Exact transport cost through explicit plan variables.
    MkExact,
    /// Entropic transport through the smooth conjugate and its gradient.
    SinkhornGrad,
    /// Entropic transport through plan variables and the Lambert-W prox.
    SinkhornProx,
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l1" => Ok(Self::L1),
            "mk_exact" => Ok(Self::MkExact),
            "sinkhorn_grad" => Ok(Self::SinkhornGrad),
            "sinkhorn_prox" => Ok(Self::SinkhornProx),
            other => Err(Error::InvalidParameter(format!("unknown variant `{other}`"))),
        }
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::L1 => "l1",
            Self::MkExact => "mk_exact",
            Self::SinkhornGrad => "sinkhorn_grad",
            Self::SinkhornProx => "sinkhorn_prox",
        })
    }
}

/// Ground cost between codebook centroids.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostConfig {
    /// `1 − exp(−γ d)`; `gamma` defaults to 2 / median centroid distance.
    ExpConcave {
        #[serde(default)]
        gamma: Option<f64>,
    },
    EuclideanP { p: f64 },
}

impl Default for CostConfig {
    fn default() -> Self {
        Self::ExpConcave { gamma: None }
    }
}

impl CostConfig {
    /// Normalized cost from `src` (prior bins, rows) to `dst` (image bins).
    pub fn build(&self, src: &[Vec<f64>], dst: &[Vec<f64>]) -> Result<CostMatrix> {
        let kind = match *self {
            CostConfig::ExpConcave { gamma } => {
                let gamma = gamma.unwrap_or_else(|| {
                    let mut all = src.to_vec();
                    all.extend_from_slice(dst);
                    default_exp_gamma(&all)
                });
                CostKind::ExpConcave { gamma }
            }
            CostConfig::EuclideanP { p } => CostKind::EuclideanPower { p },
        };
        build_cost_matrix(src, dst, kind, true)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegConfig {
    /// Total-variation weight.
    pub rho: f64,
    /// Entropic parameter of the Sinkhorn variants.
    pub lambda: f64,
    pub cost: CostConfig,
    pub variant: Variant,
    /// Preconditioner balance `r` and dual slot `δ`.
    pub precond_r: f64,
    pub precond_delta: f64,
    pub precond_gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub threshold: f64,
    /// Largest bin count accepted by the exact variant.
    pub mk_exact_max_bins: usize,
}

impl Default for SegConfig {
    fn default() -> Self {
        Self {
            rho: 1.0,
            lambda: 100.0,
            cost: CostConfig::default(),
            variant: Variant::SinkhornProx,
            precond_r: 1.0,
            precond_delta: 1.0,
            precond_gamma: 1.0,
            tol: 1e-6,
            max_iter: 5000,
            threshold: 0.5,
            mk_exact_max_bins: 1024,
        }
    }
}

impl SegConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(Error::InvalidParameter(format!("rho must be ≥ 0, got {}", self.rho)));
        }
        if !(self.lambda > 0.0) {
            return Err(Error::InvalidParameter(format!("lambda must be positive, got {}", self.lambda)));
        }
        if matches!(self.variant, Variant::SinkhornGrad | Variant::SinkhornProx) && self.lambda.is_infinite() {
            return Err(Error::InvalidParameter("entropic variants need a finite lambda".into()));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidParameter(format!("threshold must lie in (0, 1), got {}", self.threshold)));
        }
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(Error::InvalidParameter("tol must be ≥ 0 and max_iter positive".into()));
        }
        Ok(())
    }
}
