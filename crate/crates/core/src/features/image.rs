use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Raster image with interleaved channels, row-major, in input units
/// (0..255 for 8-bit sources).
#[derive(Clone, Debug, PartialEq)]
pub struct Image {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl Image {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 || channels == 0 {
            return Err(Error::InvalidParameter(format!(
                "image must be non-empty, got {width}x{height}x{channels}"
            )));
        }
        if data.len() != width * height * channels {
            return Err(Error::DimensionMismatch(format!(
                "{width}x{height}x{channels} image needs {} samples, got {}",
                width * height * channels,
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("image samples must be finite".into()));
        }
        Ok(Self { width, height, channels, data })
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn pixel(&self, x: usize) -> &[f64] {
        &self.data[x * self.channels..(x + 1) * self.channels]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Channel values as-is.
    #[default]
    Rgb,
    /// Per channel, the Euclidean norm of the backward-difference gradient
    /// with zero values outside the image.
    #[serde(alias = "gradient_norm_per_channel")]
    Gradnorm,
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rgb" => Ok(Self::Rgb),
            "gradnorm" | "gradient_norm_per_channel" => Ok(Self::Gradnorm),
            other => Err(Error::InvalidParameter(format!("unknown feature kind `{other}`"))),
        }
    }
}

/// Per-pixel feature vectors, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureImage {
    pub width: usize,
    pub height: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl FeatureImage {
    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn feature(&self, x: usize) -> &[f64] {
        &self.values[x * self.dim..(x + 1) * self.dim]
    }
}

pub fn extract_features(image: &Image, kind: FeatureKind) -> FeatureImage {
    let (w, h, d) = (image.width, image.height, image.channels);
    let values = match kind {
        FeatureKind::Rgb => image.data.clone(),
        FeatureKind::Gradnorm => {
            let mut out = vec![0.0; w * h * d];
            for i in 0..h {
                for j in 0..w {
                    let x = i * w + j;
                    for c in 0..d {
                        let v = image.data[x * d + c];
                        let up = if i > 0 { image.data[(x - w) * d + c] } else { 0.0 };
                        let left = if j > 0 { image.data[(x - 1) * d + c] } else { 0.0 };
                        out[x * d + c] = (v - up).hypot(v - left);
                    }
                }
            }
            out
        }
    };
    FeatureImage { width: w, height: h, dim: d, values }
}
