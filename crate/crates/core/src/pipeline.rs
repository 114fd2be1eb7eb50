//! Image-to-result pipelines shared by the command line and the service:
//! features, codebook, assignment, priors, and the solve.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::coseg::{coseg_multi, CosegConfig, CosegInput, CosegResult};
use crate::features::{
    build_assignment, extract_features, kmeans, prior_from_scribbles, AssignmentOperator, Codebook, FeatureImage,
    FeatureKind, Image, ScribbleSet,
};
use crate::models::{segment_multi_phase, segment_two_phase, SegConfig, SegInput, SegResult, Variant};
use crate::ot::{CostMatrix, Histogram};
use crate::pd::Monitor;
use crate::{Error, Result};

/// Feature and codebook settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub features: FeatureKind,
    /// Codebook size; `None` means `8^dim`, reduced to the number of
    /// distinct feature vectors when the image has fewer.
    pub bins: Option<usize>,
    pub seed: u64,
    pub kmeans_iter: usize,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self { features: FeatureKind::Rgb, bins: None, seed: 0, kmeans_iter: 100 }
    }
}

/// Codebook with the feature kind it was built on, as stored on disk.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CodebookFile {
    pub features: FeatureKind,
    pub seed: u64,
    pub codebook: Codebook,
}

fn stack(features: &[FeatureImage]) -> FeatureImage {
    let dim = features[0].dim;
    let values: Vec<f64> = features.iter().flat_map(|f| f.values.iter().copied()).collect();
    FeatureImage { width: values.len() / dim, height: 1, dim, values }
}

fn distinct_at_most(f: &FeatureImage, cap: usize) -> usize {
    let mut seen = HashSet::new();
    for x in 0..f.pixels() {
        seen.insert(f.feature(x).iter().map(|v| v.to_bits()).collect::<Vec<_>>());
        if seen.len() >= cap {
            break;
        }
    }
    seen.len()
}

/// Codebook fitted on the pixels of all `images` together.
pub fn build_codebook(images: &[&Image], config: &FeatureConfig) -> Result<CodebookFile> {
    if images.is_empty() {
        return Err(Error::InvalidParameter("no images".into()));
    }
    let features: Vec<FeatureImage> = images.iter().map(|im| extract_features(im, config.features)).collect();
    if features.iter().any(|f| f.dim != features[0].dim) {
        return Err(Error::DimensionMismatch("images have different channel counts".into()));
    }
    let all = stack(&features);
    let bins = match config.bins {
        Some(m) => m,
        None => {
            let m = 8usize.saturating_pow(all.dim as u32);
            distinct_at_most(&all, m)
        }
    };
    let codebook = kmeans(&all, bins, config.seed, config.kmeans_iter)?;
    Ok(CodebookFile { features: config.features, seed: config.seed, codebook })
}

pub fn assign(image: &Image, codebook: &CodebookFile) -> Result<AssignmentOperator> {
    build_assignment(&extract_features(image, codebook.features), &codebook.codebook)
}

/// Cost between the codebook's own bins, or `None` for ℓ1.
pub fn self_cost(codebook: &Codebook, variant: Variant, cost: &crate::models::CostConfig) -> Result<Option<CostMatrix>> {
    if variant == Variant::L1 {
        return Ok(None);
    }
    cost.build(&codebook.centroids, &codebook.centroids).map(Some)
}

/// Priors from scribbles; labels must run from 1 to `K ≥ 2` without gaps.
pub fn scribble_priors(op: &AssignmentOperator, scribbles: &ScribbleSet) -> Result<Vec<Histogram>> {
    let labelled = scribbles.nonempty_labels();
    if labelled < 2 {
        return Err(Error::TooFewLabels(labelled));
    }
    prior_from_scribbles(op, scribbles)
}

#[derive(Clone, Debug)]
pub struct Segmentation {
    pub codebook: CodebookFile,
    pub assignment: AssignmentOperator,
    pub priors: Vec<Histogram>,
    pub result: SegResult,
}

/// Scribble-driven segmentation of one image: two labels give the
/// two-phase model, more give the multi-phase model. The codebook is built
/// from the image when none is passed.
pub fn segment_image(
    image: &Image,
    scribbles: &ScribbleSet,
    codebook: Option<CodebookFile>,
    features: &FeatureConfig,
    config: &SegConfig,
    with_energy: bool,
    monitor: Option<&mut dyn Monitor>,
) -> Result<Segmentation> {
    config.validate()?;
    if scribbles.width != image.width || scribbles.height != image.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} scribbles on a {}x{} image",
            scribbles.width, scribbles.height, image.width, image.height
        )));
    }
    let labelled = scribbles.nonempty_labels();
    if labelled < 2 {
        return Err(Error::TooFewLabels(labelled));
    }
    let codebook = match codebook {
        Some(c) => c,
        None => build_codebook(&[image], features)?,
    };
    let assignment = assign(image, &codebook)?;
    let priors = scribble_priors(&assignment, scribbles)?;
    let cost = self_cost(&codebook.codebook, config.variant, &config.cost)?;
    let input = SegInput { assignment: &assignment, priors: &priors, cost: cost.as_ref() };
    let result = if priors.len() == 2 {
        segment_two_phase(&input, config, with_energy, monitor)?
    } else {
        segment_multi_phase(&input, config, with_energy, monitor)?
    };
    Ok(Segmentation { codebook, assignment, priors, result })
}

#[derive(Clone, Debug)]
pub struct Cosegmentation {
    pub codebook: CodebookFile,
    pub assignments: Vec<AssignmentOperator>,
    pub result: CosegResult,
}

/// Co-segmentation of images on a codebook fitted to all of them.
pub fn cosegment_images(
    images: &[&Image],
    features: &FeatureConfig,
    config: &CosegConfig,
    with_energy: bool,
    monitor: Option<&mut dyn Monitor>,
) -> Result<Cosegmentation> {
    config.validate(images.len())?;
    let codebook = build_codebook(images, features)?;
    let assignments = images.iter().map(|im| assign(im, &codebook)).collect::<Result<Vec<_>>>()?;
    let cost = self_cost(&codebook.codebook, config.dissimilarity, &config.cost)?;
    let input = CosegInput { assignments: &assignments, cost: cost.as_ref() };
    let result = coseg_multi(&input, config, with_energy, monitor)?;
    Ok(Cosegmentation { codebook, assignments, result })
}
