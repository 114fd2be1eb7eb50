//! Unsupervised co-segmentation of images sharing a codebook: a single
//! pairwise term, all pairs, or an ℓ1 barycenter estimated jointly with the
//! masks.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::features::AssignmentOperator;
use crate::models::assembly::{Model, ModelBuilder, PixelConstraint, Side, TermKind};
use crate::models::{data_term, near_binarity, run_model, CostConfig, SegConfig, Variant};
use crate::ot::CostMatrix;
use crate::pd::{Monitor, SolveReport};
use crate::{Error, Result};

/// Largest image count of the all-pairs model.
pub const MAX_PAIRWISE_IMAGES: usize = 6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CosegVariant {
    #[default]
    Pairwise,
    PairwiseMulti,
    BarycentricL1,
}

impl CosegVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            CosegVariant::Pairwise => "pairwise",
            CosegVariant::PairwiseMulti => "pairwise_multi",
            CosegVariant::BarycentricL1 => "barycentric_l1",
        }
    }
}

impl fmt::Display for CosegVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CosegVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pairwise" => Ok(Self::Pairwise),
            "pairwise_multi" => Ok(Self::PairwiseMulti),
            "barycentric_l1" | "barycentric" => Ok(Self::BarycentricL1),
            _ => Err(Error::InvalidParameter(format!(
                "unknown co-segmentation variant {s:?} (expected pairwise, pairwise_multi or barycentric_l1)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CosegConfig {
    pub variant: CosegVariant,
    /// Dissimilarity of the pairwise models; the barycentric model is ℓ1 only.
    pub dissimilarity: Variant,
    pub rho: f64,
    /// Ballooning weight.
    pub delta: f64,
    /// Per-image overrides of `rho` and `delta`.
    pub rho_per_image: Option<Vec<f64>>,
    pub delta_per_image: Option<Vec<f64>>,
    pub lambda: f64,
    pub cost: CostConfig,
    pub precond_r: f64,
    pub precond_delta: f64,
    pub precond_gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub threshold: f64,
    pub mk_exact_max_bins: usize,
}

impl Default for CosegConfig {
    fn default() -> Self {
        let seg = SegConfig::default();
        Self {
            variant: CosegVariant::default(),
            dissimilarity: Variant::L1,
            rho: seg.rho,
            delta: 0.5,
            rho_per_image: None,
            delta_per_image: None,
            lambda: seg.lambda,
            cost: seg.cost,
            precond_r: seg.precond_r,
            precond_delta: seg.precond_delta,
            precond_gamma: seg.precond_gamma,
            tol: seg.tol,
            max_iter: seg.max_iter,
            threshold: seg.threshold,
            mk_exact_max_bins: seg.mk_exact_max_bins,
        }
    }
}

impl CosegConfig {
    /// The solver-level settings shared with supervised segmentation.
    pub fn seg(&self) -> SegConfig {
        SegConfig {
            rho: self.rho,
            lambda: self.lambda,
            cost: self.cost,
            variant: self.dissimilarity,
            precond_r: self.precond_r,
            precond_delta: self.precond_delta,
            precond_gamma: self.precond_gamma,
            tol: self.tol,
            max_iter: self.max_iter,
            threshold: self.threshold,
            mk_exact_max_bins: self.mk_exact_max_bins,
        }
    }

    pub fn validate(&self, images: usize) -> Result<()> {
        self.seg().validate()?;
        if !(self.delta >= 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidParameter(format!("delta must be ≥ 0, got {}", self.delta)));
        }
        for (name, v) in [("rho_per_image", &self.rho_per_image), ("delta_per_image", &self.delta_per_image)] {
            if let Some(v) = v {
                if v.len() != images {
                    return Err(Error::InvalidParameter(format!("{name} has {} entries for {images} images", v.len())));
                }
                if v.iter().any(|x| !(*x >= 0.0 && x.is_finite())) {
                    return Err(Error::InvalidParameter(format!("{name} entries must be finite and ≥ 0")));
                }
            }
        }
        Ok(())
    }

    fn rho_of(&self, k: usize) -> f64 {
        self.rho_per_image.as_ref().map_or(self.rho, |v| v[k])
    }

    fn delta_of(&self, k: usize) -> f64 {
        self.delta_per_image.as_ref().map_or(self.delta, |v| v[k])
    }
}

/// Images on a shared codebook. The cost (bins × bins) is needed by the
/// transport dissimilarities only.
#[derive(Clone, Copy, Debug)]
pub struct CosegInput<'a> {
    pub assignments: &'a [AssignmentOperator],
    pub cost: Option<&'a CostMatrix>,
}

#[derive(Clone, Debug)]
pub struct CosegResult {
    /// Foreground probability per image.
    pub maps: Vec<Vec<f64>>,
    /// Thresholded masks, 1 = foreground.
    pub masks: Vec<Vec<u8>>,
    /// Barycenter histogram (barycentric model only).
    pub barycenter: Option<Vec<f64>>,
    pub energy: Option<f64>,
    pub near_binarity: f64,
    pub report: SolveReport,
}

fn check_input(input: &CosegInput, config: &CosegConfig) -> Result<usize> {
    let p = input.assignments.len();
    if p < 2 {
        return Err(Error::InvalidParameter(format!("co-segmentation needs at least two images, got {p}")));
    }
    config.validate(p)?;
    let bins = input.assignments[0].bins;
    if input.assignments.iter().any(|a| a.bins != bins) {
        return Err(Error::DimensionMismatch("co-segmented images must share a codebook".into()));
    }
    Ok(bins)
}

fn pixel_blocks(b: &mut ModelBuilder, input: &CosegInput, config: &CosegConfig) {
    for (k, op) in input.assignments.iter().enumerate() {
        b.add_block(op, config.rho_of(k), config.delta_of(k));
    }
}

fn pair_term(input: &CosegInput, config: &CosegConfig, k: usize, l: usize, bins: usize) -> Result<TermKind> {
    let n = input.assignments[k].pixels().min(input.assignments[l].pixels()) as f64;
    data_term(config.dissimilarity, config.lambda, config.mk_exact_max_bins, input.cost, (bins, bins), n)
}

fn pairwise_model(input: &CosegInput, config: &CosegConfig) -> Result<Model> {
    let bins = check_input(input, config)?;
    let p = input.assignments.len();
    if config.variant == CosegVariant::Pairwise && p != 2 {
        return Err(Error::InvalidParameter(format!("the pairwise model takes two images, got {p}; use pairwise_multi or barycentric_l1")));
    }
    if p > MAX_PAIRWISE_IMAGES {
        return Err(Error::TooLarge(format!(
            "pairwise_multi is limited to {MAX_PAIRWISE_IMAGES} images, got {p}; use barycentric_l1"
        )));
    }
    let mut b = ModelBuilder::new(PixelConstraint::Box);
    pixel_blocks(&mut b, input, config);
    for k in 0..p {
        for l in k + 1..p {
            let kind = pair_term(input, config, k, l, bins)?;
            b.add_term(kind, Side::assign(k, bins), Side::assign(l, bins));
        }
    }
    b.build()
}

fn barycentric_model(input: &CosegInput, config: &CosegConfig, frozen: Option<&[Vec<f64>]>) -> Result<Model> {
    let bins = check_input(input, config)?;
    if config.dissimilarity != Variant::L1 {
        return Err(Error::Unsupported(format!(
            "the barycentric model supports the l1 dissimilarity only; {} requires equal masses between every region and the barycenter",
            config.dissimilarity
        )));
    }
    let mut b = ModelBuilder::new(PixelConstraint::Box);
    pixel_blocks(&mut b, input, config);
    b.set_free(bins);
    for k in 0..input.assignments.len() {
        b.add_term(TermKind::L1, Side::assign(k, bins), Side::free(bins));
    }
    if let Some(maps) = frozen {
        if maps.len() != input.assignments.len() {
            return Err(Error::DimensionMismatch(format!("{} maps for {} images", maps.len(), input.assignments.len())));
        }
        for (k, m) in maps.iter().enumerate() {
            if m.len() != input.assignments[k].pixels() {
                return Err(Error::DimensionMismatch(format!("map {k} has {} pixels", m.len())));
            }
            b.freeze_block(k, m);
        }
    }
    b.build()
}

fn model_for(input: &CosegInput, config: &CosegConfig) -> Result<Model> {
    match config.variant {
        CosegVariant::Pairwise | CosegVariant::PairwiseMulti => pairwise_model(input, config),
        CosegVariant::BarycentricL1 => barycentric_model(input, config, None),
    }
}

fn solve_model(model: &Model, config: &CosegConfig, with_energy: bool, monitor: Option<&mut dyn Monitor>) -> Result<CosegResult> {
    let (u, report) = run_model(model, &config.seg(), monitor)?;
    let maps = model.maps(&u);
    let masks = maps.iter().map(|m| m.iter().map(|&v| u8::from(v > config.threshold)).collect()).collect();
    let barycenter = (config.variant == CosegVariant::BarycentricL1).then(|| model.free(&u).to_vec());
    let energy = if with_energy { Some(model.energy(&u)?) } else { None };
    Ok(CosegResult { near_binarity: near_binarity(&maps), maps, masks, barycenter, energy, report })
}

/// Two-image co-segmentation with one dissimilarity term and ballooning.
/// Transport dissimilarities force both regions to the same area.
pub fn coseg_pair(
    input: &CosegInput,
    config: &CosegConfig,
    with_energy: bool,
    monitor: Option<&mut dyn Monitor>,
) -> Result<CosegResult> {
    if config.variant != CosegVariant::Pairwise {
        return Err(Error::InvalidParameter(format!("coseg_pair runs the pairwise model, not {}", config.variant)));
    }
    let model = pairwise_model(input, config)?;
    solve_model(&model, config, with_energy, monitor)
}

/// All-pairs or barycentric co-segmentation of `P ≥ 2` images.
pub fn coseg_multi(
    input: &CosegInput,
    config: &CosegConfig,
    with_energy: bool,
    monitor: Option<&mut dyn Monitor>,
) -> Result<CosegResult> {
    let model = model_for(input, config)?;
    solve_model(&model, config, with_energy, monitor)
}

/// Objective of inner maps (and the barycenter, for the barycentric
/// model). Transport terms between regions of different areas are `+∞`.
pub fn coseg_energy(input: &CosegInput, maps: &[Vec<f64>], barycenter: Option<&[f64]>, config: &CosegConfig) -> Result<f64> {
    let model = model_for(input, config)?;
    if maps.len() != input.assignments.len() || maps.iter().zip(input.assignments).any(|(m, a)| m.len() != a.pixels()) {
        return Err(Error::DimensionMismatch("maps do not match the images".into()));
    }
    let free = match (config.variant, barycenter) {
        (CosegVariant::BarycentricL1, Some(b)) if b.len() == input.assignments[0].bins => Some(b),
        (CosegVariant::BarycentricL1, _) => {
            return Err(Error::InvalidParameter("the barycentric energy needs a barycenter on the shared bins".into()))
        }
        _ => None,
    };
    model.energy(&model.embed(maps, free))
}

/// Barycenter minimizing the ℓ1 term for fixed maps, computed by the
/// solver with every map clamped.
pub fn barycenter_for_maps(input: &CosegInput, maps: &[Vec<f64>], config: &CosegConfig) -> Result<(Vec<f64>, SolveReport)> {
    let config = CosegConfig { variant: CosegVariant::BarycentricL1, ..config.clone() };
    let model = barycentric_model(input, &config, Some(maps))?;
    let (u, report) = run_model(&model, &config.seg(), None)?;
    Ok((model.free(&u).to_vec(), report))
}
