use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use super::AudioSignal;
use crate::error::{Error, Result};
use crate::exec::Exec;

/// Floor added before the log so silence stays finite.
pub const LOG_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MelConfig {
    pub n_mels: usize,
    pub win_seconds: f64,
    pub hop_seconds: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        MelConfig {
            n_mels: 40,
            win_seconds: 0.025,
            hop_seconds: 0.010,
        }
    }
}

impl MelConfig {
    pub fn win_samples(&self, sr: u32) -> usize {
        (self.win_seconds * sr as f64).round() as usize
    }

    pub fn hop_samples(&self, sr: u32) -> usize {
        (self.hop_seconds * sr as f64).round() as usize
    }

    /// Frames produced for `n` samples, or 0 when shorter than one window.
    pub fn num_frames(&self, n: usize, sr: u32) -> usize {
        let (win, hop) = (self.win_samples(sr), self.hop_samples(sr));
        if n < win {
            0
        } else {
            (n - win) / hop + 1
        }
    }

    pub fn frame_rate(&self) -> f64 {
        1.0 / self.hop_seconds
    }
}

/// Nonnegative `T × D` mel energy.
#[derive(Debug, Clone, PartialEq)]
pub struct MelEnergy {
    pub frames: Vec<f64>,
    pub num_frames: usize,
    pub n_mels: usize,
    pub hop_seconds: f64,
}

impl MelEnergy {
    pub fn new(frames: Vec<f64>, n_mels: usize, hop_seconds: f64) -> Result<Self> {
        if n_mels == 0 || frames.is_empty() || frames.len() % n_mels != 0 {
            return Err(Error::contract(format!(
                "{} mel values do not split into {n_mels} bands",
                frames.len()
            )));
        }
        Ok(MelEnergy {
            num_frames: frames.len() / n_mels,
            frames,
            n_mels,
            hop_seconds,
        })
    }

    pub fn at(&self, t: usize, d: usize) -> f64 {
        self.frames[t * self.n_mels + d]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * self.n_mels..(t + 1) * self.n_mels]
    }
}

pub fn hz_to_mel(f: f64) -> f64 {
    2595.0 * (1.0 + f / 700.0).log10()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * (10f64.powf(m / 2595.0) - 1.0)
}

/// HTK triangular filters spanning 0 Hz to Nyquist, `n_mels × (n_fft/2 + 1)`.
pub fn mel_filterbank(n_mels: usize, n_fft: usize, sample_rate: u32) -> Vec<Vec<f64>> {
    let nyq = sample_rate as f64 / 2.0;
    let top = hz_to_mel(nyq);
    let edges: Vec<f64> = (0..n_mels + 2)
        .map(|i| mel_to_hz(top * i as f64 / (n_mels + 1) as f64))
        .collect();
    let bins = n_fft / 2 + 1;
    (0..n_mels)
        .map(|m| {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            (0..bins)
                .map(|k| {
                    let f = k as f64 * sample_rate as f64 / n_fft as f64;
                    let up = (f - lo) / (c - lo);
                    let down = (hi - f) / (hi - c);
                    up.min(down).max(0.0)
                })
                .collect()
        })
        .collect()
}

pub fn hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / n as f64).cos())
        .collect()
}

pub fn mel_energy(signal: &AudioSignal, cfg: &MelConfig) -> Result<MelEnergy> {
    mel_energy_with(signal, cfg, Exec::default())
}

/// Hann-windowed power spectrum → mel filterbank → `ln` → `exp` → magnitude.
pub fn mel_energy_with(signal: &AudioSignal, cfg: &MelConfig, exec: Exec) -> Result<MelEnergy> {
    let sr = signal.sample_rate;
    let (win, hop) = (cfg.win_samples(sr), cfg.hop_samples(sr));
    if win == 0 || hop == 0 || cfg.n_mels == 0 {
        return Err(Error::contract("window, hop and n_mels must be positive"));
    }
    let frames = cfg.num_frames(signal.samples.len(), sr);
    if frames == 0 {
        return Err(Error::contract(format!(
            "signal of {} samples is shorter than one {win}-sample window",
            signal.samples.len()
        )));
    }
    let n_fft = win.next_power_of_two();
    let fft: Arc<dyn Fft<f64>> = FftPlanner::new().plan_fft_forward(n_fft);
    let window = hann(win);
    let fb = mel_filterbank(cfg.n_mels, n_fft, sr);
    let rows = exec.map(frames, |t| {
        let mut buf = vec![Complex::new(0.0, 0.0); n_fft];
        for (i, b) in buf.iter_mut().take(win).enumerate() {
            b.re = signal.samples[t * hop + i] * window[i];
        }
        fft.process(&mut buf);
        let power: Vec<f64> = buf[..n_fft / 2 + 1].iter().map(|c| c.norm_sqr()).collect();
        fb.iter()
            .map(|filt| {
                let p: f64 = filt.iter().zip(&power).map(|(w, p)| w * p).sum();
                let log_mel = (p + LOG_FLOOR).ln();
                log_mel.exp().abs()
            })
            .collect::<Vec<f64>>()
    });
    MelEnergy::new(rows.concat(), cfg.n_mels, cfg.hop_seconds)
}
