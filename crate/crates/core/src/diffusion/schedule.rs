use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const BETA_START: f64 = 1e-4;
pub const BETA_END: f64 = 2e-2;

/// Per-step `β_t` and cumulative `ᾱ_t = ∏_{s ≤ t} (1 − β_s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSchedule {
    betas: Vec<f64>,
    alpha_bars: Vec<f64>,
}

impl NoiseSchedule {
    /// Linear `β` from 1e-4 to 2e-2 over `steps` steps.
    pub fn linear(steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::contract(format!("schedule needs at least 2 steps, got {steps}")));
        }
        let betas = (0..steps)
            .map(|t| BETA_START + (BETA_END - BETA_START) * t as f64 / (steps - 1) as f64)
            .collect();
        Self::from_betas(betas)
    }

    pub fn from_betas(betas: Vec<f64>) -> Result<Self> {
        if betas.len() < 2 || betas.iter().any(|b| !(0.0..1.0).contains(b)) {
            return Err(Error::contract("betas must lie in [0, 1) with at least 2 steps".to_string()));
        }
        let mut acc = 1.0;
        let alpha_bars = betas
            .iter()
            .map(|b| {
                acc *= 1.0 - b;
                acc
            })
            .collect();
        Ok(NoiseSchedule { betas, alpha_bars })
    }

    /// Build directly from `ᾱ` values in `[0, 1]`; betas are recovered where defined.
    pub fn from_alpha_bars(alpha_bars: Vec<f64>) -> Result<Self> {
        if alpha_bars.is_empty() || alpha_bars.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::contract("alpha_bar values must lie in [0, 1]".to_string()));
        }
        let mut prev = 1.0;
        let betas = alpha_bars
            .iter()
            .map(|&a| {
                let b = if prev > 0.0 { 1.0 - a / prev } else { 1.0 };
                prev = a;
                b
            })
            .collect();
        Ok(NoiseSchedule { betas, alpha_bars })
    }

    pub fn len(&self) -> usize {
        self.alpha_bars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alpha_bars.is_empty()
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn alpha_bar(&self, t: usize) -> Result<f64> {
        self.alpha_bars.get(t).copied().ok_or_else(|| {
            Error::contract(format!("timestep {t} outside schedule of {} steps", self.len()))
        })
    }

    /// `n` evenly spaced timesteps from `len − 1` down to 0.
    pub fn ddim_timesteps(&self, n: usize) -> Result<Vec<usize>> {
        if n == 0 || n > self.len() {
            return Err(Error::contract(format!(
                "{n} inference steps for a {}-step schedule",
                self.len()
            )));
        }
        let last = (self.len() - 1) as f64;
        if n == 1 {
            return Ok(vec![self.len() - 1]);
        }
        Ok((0..n)
            .map(|i| (last * (n - 1 - i) as f64 / (n - 1) as f64).round() as usize)
            .collect())
    }
}
