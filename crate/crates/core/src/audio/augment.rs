use rand::Rng;
use serde::{Deserialize, Serialize};

use super::MelEnergy;

/// Fraction of the value range that sets the clamp threshold.
pub const THRESH_FRACTION: f64 = 0.1;

/// Whether min/max/threshold are taken over the whole clip or per mel band.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormScope {
    #[default]
    Global,
    PerBand,
}

/// Low-frequency sinusoid `A · sin(2πt / f_r + φ)`, `t` in frames.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentParams {
    pub amplitude: f64,
    pub phase: f64,
    pub period: f64,
}

impl AugmentParams {
    /// `A ~ U(0, 4)`, `φ ~ U(0, 2π)`, `f_r ~ U(150, 1200)`.
    pub fn sample<R: Rng + ?Sized>(rng: &mut R) -> Self {
        AugmentParams {
            amplitude: rng.random_range(0.0..4.0),
            phase: rng.random_range(0.0..2.0 * std::f64::consts::PI),
            period: rng.random_range(150.0..1200.0),
        }
    }

    pub fn none() -> Self {
        AugmentParams {
            amplitude: 0.0,
            phase: 0.0,
            period: 1.0,
        }
    }

    pub fn noise(&self, t: usize) -> f64 {
        self.amplitude * (2.0 * std::f64::consts::PI * t as f64 / self.period + self.phase).sin()
    }
}

fn ranges(mel: &MelEnergy, scope: NormScope) -> Vec<(f64, f64)> {
    let d = mel.n_mels;
    match scope {
        NormScope::Global => {
            let lo = mel.frames.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = mel.frames.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            vec![(lo, hi); d]
        }
        NormScope::PerBand => (0..d)
            .map(|b| {
                (0..mel.num_frames).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), t| {
                    let v = mel.at(t, b);
                    (lo.min(v), hi.max(v))
                })
            })
            .collect(),
    }
}

/// Add the sinusoid, hold values that started above `min + 0.1·(max − min)`
/// at or above that threshold, then rescale by the original range into `[0, 1]`.
/// A constant input (or band) maps to zeros.
pub fn augment_mel(mel: &MelEnergy, params: &AugmentParams, scope: NormScope) -> MelEnergy {
    let r = ranges(mel, scope);
    let d = mel.n_mels;
    let frames = mel
        .frames
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let (lo, hi) = r[i % d];
            if hi <= lo {
                return 0.0;
            }
            let thresh = lo + THRESH_FRACTION * (hi - lo);
            let shifted = x + params.noise(i / d);
            let x2 = if x > thresh { shifted.max(thresh) } else { shifted };
            ((x2 - lo) / (hi - lo)).clamp(0.0, 1.0)
        })
        .collect();
    MelEnergy {
        frames,
        num_frames: mel.num_frames,
        n_mels: d,
        hop_seconds: mel.hop_seconds,
    }
}

/// Min/max rescaling into `[0, 1]` without noise.
pub fn normalize01(mel: &MelEnergy, scope: NormScope) -> MelEnergy {
    augment_mel(mel, &AugmentParams::none(), scope)
}
