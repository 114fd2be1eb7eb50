use super::AssignmentOperator;
use crate::ot::Histogram;
use crate::{Error, Result};

/// One binary mask per label; label `k` (1-based) is `masks[k - 1]`.
/// Masks may overlap.
#[derive(Clone, Debug, PartialEq)]
pub struct ScribbleSet {
    pub width: usize,
    pub height: usize,
    pub masks: Vec<Vec<bool>>,
}

impl ScribbleSet {
    /// From an indexed mask where 0 is unlabeled and `k` marks label `k`.
    pub fn from_indexed(width: usize, height: usize, indices: &[u8]) -> Result<Self> {
        if indices.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} scribble mask with {} entries",
                indices.len()
            )));
        }
        let k = indices.iter().copied().max().unwrap_or(0) as usize;
        let masks = (1..=k).map(|l| indices.iter().map(|&v| v as usize == l).collect()).collect();
        Ok(Self { width, height, masks })
    }

    pub fn labels(&self) -> usize {
        self.masks.len()
    }

    /// Number of labels with at least one marked pixel.
    pub fn nonempty_labels(&self) -> usize {
        self.masks.iter().filter(|m| m.iter().any(|&b| b)).count()
    }

    /// Label of each pixel (0 = unlabeled); on overlap the highest label wins.
    pub fn to_indexed(&self) -> Vec<u8> {
        let mut out = vec![0u8; self.width * self.height];
        for (k, mask) in self.masks.iter().enumerate() {
            for (o, &b) in out.iter_mut().zip(mask) {
                if b {
                    *o = (k + 1) as u8;
                }
            }
        }
        out
    }
}

/// Normalized histogram of each label's marked pixels.
pub fn prior_from_scribbles(op: &AssignmentOperator, scribbles: &ScribbleSet) -> Result<Vec<Histogram>> {
    if scribbles.width != op.width || scribbles.height != op.height {
        return Err(Error::DimensionMismatch(format!(
            "{}x{} scribbles on a {}x{} image",
            scribbles.width, scribbles.height, op.width, op.height
        )));
    }
    scribbles
        .masks
        .iter()
        .enumerate()
        .map(|(k, mask)| {
            let mut h = vec![0.0; op.bins];
            let mut count = 0usize;
            for (&b, &bin) in mask.iter().zip(&op.bin_of_pixel) {
                if b {
                    h[bin as usize] += 1.0;
                    count += 1;
                }
            }
            if count == 0 {
                return Err(Error::EmptyScribble(k + 1));
            }
            Histogram::new(h.into_iter().map(|v| v / count as f64).collect())
        })
        .collect()
}
