use serde::{Deserialize, Serialize};

use super::{MotionSequence, MOTION_DIM};
use crate::error::{Error, Result};

/// Lower bound applied to every per-dimension standard deviation.
pub const STD_FLOOR: f64 = 1e-6;

/// Per-dimension mean and (floored) population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

/// Statistics over every masked-in frame of the corpus.
pub fn compute_stats(corpus: &[MotionSequence]) -> Result<NormStats> {
    let frames: Vec<&[f64]> = corpus
        .iter()
        .flat_map(|m| (0..m.num_frames()).filter(|&t| m.mask[t]).map(move |t| m.frame(t)))
        .collect();
    if frames.len() < 2 {
        return Err(Error::contract(format!(
            "statistics need at least 2 valid frames, corpus has {}",
            frames.len()
        )));
    }
    let n = frames.len() as f64;
    let mut mean = vec![0.0; MOTION_DIM];
    for f in &frames {
        for (m, v) in mean.iter_mut().zip(f.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; MOTION_DIM];
    for f in &frames {
        for d in 0..MOTION_DIM {
            var[d] += (f[d] - mean[d]).powi(2);
        }
    }
    let std = var.iter().map(|v| (v / n).sqrt().max(STD_FLOOR)).collect();
    Ok(NormStats { mean, std })
}

impl NormStats {
    /// Zero mean, unit std: useful when no corpus is at hand.
    pub fn identity(dim: usize) -> Self {
        NormStats {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() || self.mean.is_empty() {
            return Err(Error::contract("mean and std lengths differ".to_string()));
        }
        if self.mean.iter().chain(&self.std).any(|v| !v.is_finite()) || self.std.iter().any(|&s| s < STD_FLOOR) {
            return Err(Error::contract("statistics must be finite with std >= floor".to_string()));
        }
        Ok(())
    }

    /// `(m − μ) / σ` row by row over a flat `T × D` buffer.
    pub fn normalize(&self, data: &[f64]) -> Vec<f64> {
        let d = self.dim();
        data.iter()
            .enumerate()
            .map(|(i, v)| (v - self.mean[i % d]) / self.std[i % d])
            .collect()
    }

    /// `x · σ + μ`, the inverse of [`NormStats::normalize`].
    pub fn denormalize(&self, data: &[f64]) -> Vec<f64> {
        let d = self.dim();
        data.iter()
            .enumerate()
            .map(|(i, v)| v * self.std[i % d] + self.mean[i % d])
            .collect()
    }

    pub fn normalize_motion(&self, m: &MotionSequence) -> Vec<f64> {
        self.normalize(m.data())
    }
}
