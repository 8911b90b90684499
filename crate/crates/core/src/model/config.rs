use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::MOTION_DIM;

/// Denoiser shape. Widths, depths and head counts are free parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    pub hidden: usize,
    pub heads: usize,
    pub dual_blocks: usize,
    pub fusion_blocks: usize,
    pub mlp_ratio: usize,
    /// Mel bands per audio token frame.
    pub n_bands: usize,
    pub n_bins: usize,
    pub motion_dim: usize,
    pub rope_base: f64,
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            hidden: 256,
            heads: 4,
            dual_blocks: 4,
            fusion_blocks: 2,
            mlp_ratio: 4,
            n_bands: 40,
            n_bins: 8,
            motion_dim: MOTION_DIM,
            rope_base: 10_000.0,
            init_std: 0.02,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 || self.heads == 0 || self.hidden % self.heads != 0 {
            return Err(Error::contract(format!(
                "hidden {} must be a positive multiple of heads {}",
                self.hidden, self.heads
            )));
        }
        if self.head_dim() % 2 != 0 {
            return Err(Error::contract(format!("head dim {} must be even", self.head_dim())));
        }
        if self.dual_blocks == 0 || self.fusion_blocks == 0 {
            return Err(Error::contract("need at least one dual-stream and one fusion block"));
        }
        if self.mlp_ratio == 0 || self.n_bands == 0 || self.motion_dim == 0 {
            return Err(Error::contract("mlp_ratio, n_bands and motion_dim must be positive"));
        }
        if !(2..=256).contains(&self.n_bins) {
            return Err(Error::contract(format!("n_bins must be in 2..=256, got {}", self.n_bins)));
        }
        if !(self.rope_base > 1.0) || !(self.init_std >= 0.0) {
            return Err(Error::contract("rope_base must exceed 1 and init_std be nonnegative"));
        }
        Ok(())
    }

    pub fn head_dim(&self) -> usize {
        self.hidden / self.heads.max(1)
    }

    pub fn mlp_hidden(&self) -> usize {
        self.hidden * self.mlp_ratio
    }
}
