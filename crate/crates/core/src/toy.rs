//! Synthetic aligned data: click-train audio with beat-locked motion, and
//! Gaussian-noise motion for metric diagnostics.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::audio::AudioSignal;
use crate::error::{Error, Result};
use crate::motion::{MotionSequence, MOTION_DIM, ROT6D_DIM};

/// Decaying 1 kHz bursts, 150 ms long, at `phase + k / rate` seconds. Long
/// enough to survive the quantizer's temporal downsampling.
pub fn click_train(duration: f64, rate: f64, phase: f64, sample_rate: u32) -> Result<AudioSignal> {
    if !(rate > 0.0 && duration > 0.0) {
        return Err(Error::contract("click train needs positive rate and duration"));
    }
    let n = (duration * sample_rate as f64).round() as usize;
    let sr = sample_rate as f64;
    let mut samples = vec![0.0; n];
    let burst = (0.15 * sr) as usize;
    let mut k = 0;
    loop {
        let start = ((phase + k as f64 / rate) * sr).round() as usize;
        if start >= n {
            break;
        }
        for i in 0..burst.min(n - start) {
            let t = i as f64 / sr;
            samples[start + i] = 0.8 * (-t / 0.05).exp() * (2.0 * PI * 1000.0 * t).sin();
        }
        k += 1;
    }
    AudioSignal::new(samples, sample_rate)
}

/// Click times of [`click_train`] within `duration`.
pub fn click_times(duration: f64, rate: f64, phase: f64) -> Vec<f64> {
    (0..)
        .map(|k| phase + k as f64 / rate)
        .take_while(|&t| t < duration)
        .collect()
}

/// Rest pose plus `amplitudes[d] · cos(2π·rate·(t − phase))` on every
/// dimension: one gesture cycle per beat, with the pose extreme and a speed
/// minimum on each click.
pub fn beat_motion(frames: usize, fps: f64, rate: f64, phase: f64, amplitudes: &[f64]) -> Result<MotionSequence> {
    if amplitudes.len() != MOTION_DIM {
        return Err(Error::contract(format!("need {MOTION_DIM} amplitudes, got {}", amplitudes.len())));
    }
    let mut m = MotionSequence::rest(frames, fps)?;
    for t in 0..frames {
        let s = (2.0 * PI * rate * (t as f64 / fps - phase)).cos();
        for (v, a) in m.frame_mut(t).iter_mut().zip(amplitudes) {
            *v += a * s;
        }
    }
    Ok(m)
}

/// Rest pose with `N(0, std)` added to every rot6d value; zero translation.
pub fn noise_motion<R: Rng + ?Sized>(frames: usize, fps: f64, std: f64, rng: &mut R) -> Result<MotionSequence> {
    let dist = Normal::new(0.0, std).map_err(|e| Error::contract(e.to_string()))?;
    let mut m = MotionSequence::rest(frames, fps)?;
    for t in 0..frames {
        for v in &mut m.frame_mut(t)[..ROT6D_DIM] {
            *v += dist.sample(rng);
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ToyConfig {
    /// Beats per second, one pair per entry.
    pub tempos: Vec<f64>,
    /// First click time, seconds.
    pub phase: f64,
    /// Clip length in motion frames.
    pub frames: usize,
    pub sample_rate: u32,
    pub fps: f64,
    /// Typical per-dimension gesture amplitude.
    pub amplitude: f64,
    pub seed: u64,
}

impl Default for ToyConfig {
    fn default() -> Self {
        ToyConfig {
            tempos: vec![1.5, 2.0, 2.5, 3.0],
            phase: 0.25,
            frames: 32,
            sample_rate: 16_000,
            fps: 30.0,
            amplitude: 0.3,
            seed: 0,
        }
    }
}

/// One aligned clip.
#[derive(Debug, Clone)]
pub struct ToyPair {
    pub tempo: f64,
    pub audio: AudioSignal,
    pub motion: MotionSequence,
}

/// Per-dimension gesture amplitudes shared by every pair: random sign,
/// magnitude uniform in `[0.5, 1.5] × amplitude`.
pub fn toy_amplitudes(cfg: &ToyConfig) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    (0..MOTION_DIM)
        .map(|_| {
            let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
            sign * cfg.amplitude * rng.random_range(0.5..1.5)
        })
        .collect()
}

/// A clip of `frames` motion frames and the matching audio.
pub fn toy_pair(cfg: &ToyConfig, tempo: f64, frames: usize) -> Result<ToyPair> {
    let audio = click_train(frames as f64 / cfg.fps, tempo, cfg.phase, cfg.sample_rate)?;
    let motion = beat_motion(frames, cfg.fps, tempo, cfg.phase, &toy_amplitudes(cfg))?;
    Ok(ToyPair { tempo, audio, motion })
}

pub fn toy_dataset(cfg: &ToyConfig) -> Result<Vec<ToyPair>> {
    cfg.tempos.iter().map(|&r| toy_pair(cfg, r, cfg.frames)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clicks_land_on_schedule() {
        let a = click_train(1.0, 4.0, 0.1, 16_000).unwrap();
        assert_eq!(a.samples.len(), 16_000);
        for t in click_times(1.0, 4.0, 0.1) {
            let i = (t * 16_000.0).round() as usize;
            assert_eq!(a.samples[i], 0.0);
            assert!(a.samples[i + 4].abs() > 0.1);
        }
        assert_eq!(click_times(1.0, 4.0, 0.1).len(), 4);
    }

    #[test]
    fn gesture_extremes_sit_on_clicks() {
        let amps = vec![0.1; MOTION_DIM];
        let m = beat_motion(60, 30.0, 2.0, 0.5, &amps).unwrap();
        // Clicks at 0.5 s and 1.0 s fall on frames 15 and 30.
        assert!((m.frame(15)[0] - 1.1).abs() < 1e-12);
        assert!((m.frame(30)[0] - 1.1).abs() < 1e-12);
        assert!(m.frame(22)[0] < 1.0);
    }

    #[test]
    fn dataset_is_reproducible() {
        let cfg = ToyConfig::default();
        let a = toy_dataset(&cfg).unwrap();
        let b = toy_dataset(&cfg).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a[2].motion, b[2].motion);
        assert_eq!(a[0].motion.num_frames(), 32);
    }
}
