//! Per-pixel features, the K-means codebook, the hard-assignment histogram
//! operator and scribble priors.

mod assign;
mod image;
mod kmeans;
mod scribble;

pub use assign::{build_assignment, AssignmentOperator};
pub use image::{extract_features, FeatureImage, FeatureKind, Image};
pub use kmeans::{kmeans, Codebook, KMEANS_SAMPLE_CAP};
pub use scribble::{prior_from_scribbles, ScribbleSet};
