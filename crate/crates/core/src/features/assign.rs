use rayon::prelude::*;

use super::{Codebook, FeatureImage};
use crate::ot::Histogram;
use crate::util::par_chunks;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"OTSGASGN";
const VERSION: u32 = 1;

/// Hard assignment of every pixel to one histogram bin. Applied to a weight
/// map `u` it yields the histogram of `u`; the adjoint spreads a bin vector
/// back onto the pixels.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentOperator {
    pub bins: usize,
    pub width: usize,
    pub height: usize,
    pub bin_of_pixel: Vec<u32>,
}

pub fn build_assignment(features: &FeatureImage, codebook: &Codebook) -> Result<AssignmentOperator> {
    if features.dim != codebook.dim {
        return Err(Error::DimensionMismatch(format!(
            "features of dimension {} against a codebook of dimension {}",
            features.dim, codebook.dim
        )));
    }
    let bin_of_pixel = (0..features.pixels())
        .into_par_iter()
        .map(|x| codebook.nearest(features.feature(x)) as u32)
        .collect();
    Ok(AssignmentOperator { bins: codebook.len(), width: features.width, height: features.height, bin_of_pixel })
}

impl AssignmentOperator {
    pub fn new(bins: usize, width: usize, height: usize, bin_of_pixel: Vec<u32>) -> Result<Self> {
        if bin_of_pixel.len() != width * height {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height} grid with {} assignments",
                bin_of_pixel.len()
            )));
        }
        if let Some(b) = bin_of_pixel.iter().find(|&&b| b as usize >= bins) {
            return Err(Error::InvalidParameter(format!("bin index {b} out of range for {bins} bins")));
        }
        Ok(Self { bins, width, height, bin_of_pixel })
    }

    pub fn pixels(&self) -> usize {
        self.bin_of_pixel.len()
    }

    /// `Hu`: per-bin sum of `u`.
    pub fn histogram_of(&self, u: &[f64]) -> Histogram {
        Histogram::from_clamped(self.apply(u))
    }

    /// `Hu` without the nonnegativity requirement.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        assert_eq!(u.len(), self.pixels());
        let m = self.bins;
        let parts = par_chunks(u.len(), |r| {
            let mut h = vec![0.0; m];
            for x in r {
                h[self.bin_of_pixel[x] as usize] += u[x];
            }
            h
        });
        let mut h = vec![0.0; m];
        for p in parts {
            for (a, b) in h.iter_mut().zip(p) {
                *a += b;
            }
        }
        h
    }

    /// `Hᵀp`: each pixel reads its bin's entry.
    pub fn apply_ht(&self, p: &[f64]) -> Vec<f64> {
        assert_eq!(p.len(), self.bins);
        self.bin_of_pixel.iter().map(|&b| p[b as usize]).collect()
    }

    /// Pixel count per bin, `H1`.
    pub fn counts(&self) -> Vec<f64> {
        let mut h = vec![0.0; self.bins];
        for &b in &self.bin_of_pixel {
            h[b as usize] += 1.0;
        }
        h
    }

    /// Little-endian binary form: magic, version, bins, width, height, then
    /// one `u32` bin index per pixel.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + 4 * self.pixels());
        out.extend_from_slice(MAGIC);
        for v in [VERSION, self.bins as u32, self.width as u32, self.height as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for b in &self.bin_of_pixel {
            out.extend_from_slice(&b.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 24 || &bytes[..8] != MAGIC {
            return Err(Error::Format("not an assignment file".into()));
        }
        let word = |k: usize| u32::from_le_bytes(bytes[8 + 4 * k..12 + 4 * k].try_into().unwrap());
        if word(0) != VERSION {
            return Err(Error::Format(format!("unsupported assignment version {}", word(0))));
        }
        let (bins, width, height) = (word(1) as usize, word(2) as usize, word(3) as usize);
        let body = &bytes[24..];
        if body.len() != 4 * width * height {
            return Err(Error::Format("assignment body length does not match its header".into()));
        }
        let idx = body.chunks_exact(4).map(|c| u32::from_le_bytes(c.try_into().unwrap())).collect();
        Self::new(bins, width, height, idx)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn op(bins: usize, idx: Vec<u32>) -> AssignmentOperator {
        let n = idx.len();
        AssignmentOperator::new(bins, n, 1, idx).unwrap()
    }

    fn with_weights() -> impl Strategy<Value = (AssignmentOperator, Vec<f64>, Vec<f64>)> {
        (1usize..9, 1usize..300).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0..m as u32, n),
                proptest::collection::vec(0.0f64..1.0, n),
                proptest::collection::vec(-1.0f64..1.0, m),
            )
                .prop_map(move |(idx, u, p)| (op(m, idx), u, p))
        })
    }

    proptest! {
        #[test]
        fn adjoint_and_mass((h, u, p) in with_weights()) {
            let hu = h.apply(&u);
            let lhs: f64 = hu.iter().zip(&p).map(|(a, b)| a * b).sum();
            // Direct double sum over bins and pixels.
            let mut rhs = 0.0;
            for (x, ux) in u.iter().enumerate() {
                for (i, pi) in p.iter().enumerate() {
                    if h.bin_of_pixel[x] as usize == i {
                        rhs += ux * pi;
                    }
                }
            }
            prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
            let hty = h.apply_ht(&p);
            let rhs2: f64 = u.iter().zip(&hty).map(|(a, b)| a * b).sum();
            prop_assert!((lhs - rhs2).abs() <= 1e-12 * (1.0 + rhs.abs()));
            let mass: f64 = u.iter().sum();
            prop_assert!((hu.iter().sum::<f64>() - mass).abs() <= 1e-12 * (1.0 + mass));
        }
    }

    #[test]
    fn nearest_with_ties_to_lowest() {
        let cb = Codebook::new(vec![vec![0.0], vec![9.0], vec![4.0], vec![5.0], vec![8.0], vec![4.0]]).unwrap();
        let f = FeatureImage { width: 3, height: 1, dim: 1, values: vec![9.0, 4.5, 4.0] };
        let h = build_assignment(&f, &cb).unwrap();
        assert_eq!(h.bin_of_pixel, vec![1, 2, 2]);
    }

    #[test]
    fn ones_give_counts_and_zero_gives_zero() {
        let h = op(3, vec![0, 2, 2, 1, 2]);
        assert_eq!(h.apply(&[1.0; 5]), vec![1.0, 1.0, 3.0]);
        assert_eq!(h.counts(), vec![1.0, 1.0, 3.0]);
        assert_eq!(h.apply(&[0.0; 5]), vec![0.0; 3]);
    }

    #[test]
    fn binary_round_trip() {
        let h = AssignmentOperator::new(4, 2, 3, vec![0, 1, 2, 3, 3, 0]).unwrap();
        let bytes = h.to_bytes();
        assert_eq!(&bytes[..8], b"OTSGASGN");
        assert_eq!(AssignmentOperator::from_bytes(&bytes).unwrap(), h);
        assert!(AssignmentOperator::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(AssignmentOperator::new(2, 1, 1, vec![2]).is_err());
    }
}
