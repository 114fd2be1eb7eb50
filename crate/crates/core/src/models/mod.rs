//! Two-phase and multi-phase segmentation models, thresholding and energy
//! evaluation.

pub(crate) mod assembly;
mod config;
mod segment;
mod threshold;

pub use assembly::Grid;
pub use config::{CostConfig, SegConfig, Variant};
pub(crate) use segment::{data_term, run_model};
pub use segment::{coupling_norm, energy, segment_multi_phase, segment_two_phase, SegInput, SegResult};
pub use threshold::{near_binarity, threshold_labels};
