use serde::{Deserialize, Serialize};

use crate::audio::{mel_energy, AudioSignal, MelConfig, MelEnergy};
use crate::error::{Error, Result};
use crate::motion::JointPositions;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BeatSource {
    Audio,
    MotionBc,
    MotionSmooth,
}

/// Sorted beat timestamps in seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeatSet {
    pub timestamps: Vec<f64>,
    pub source: BeatSource,
}

impl BeatSet {
    pub fn new(timestamps: Vec<f64>, source: BeatSource) -> Result<Self> {
        if timestamps.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::contract("beat timestamps must be strictly increasing"));
        }
        if timestamps.iter().any(|t| !t.is_finite() || *t < 0.0) {
            return Err(Error::contract("beat timestamps must be finite and nonnegative"));
        }
        Ok(BeatSet { timestamps, source })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    /// One timestamp per line.
    pub fn to_csv(&self) -> String {
        self.timestamps.iter().map(|t| format!("{t}\n")).collect()
    }

    pub fn shifted(&self, dt: f64) -> Result<Self> {
        Self::new(self.timestamps.iter().map(|t| t + dt).collect(), self.source)
    }
}

/// Onset picking on the half-wave rectified rise of summed mel energy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OnsetConfig {
    /// Peaks must reach this fraction of the strongest rise.
    pub rel_threshold: f64,
    /// Peaks must be the maximum within this many seconds either side.
    pub min_gap_seconds: f64,
}

impl Default for OnsetConfig {
    fn default() -> Self {
        OnsetConfig {
            rel_threshold: 0.3,
            min_gap_seconds: 0.05,
        }
    }
}

/// `max(0, E_t − E_{t−1})` of the band-summed energy; entry 0 is 0.
pub fn onset_strength(mel: &MelEnergy) -> Vec<f64> {
    let sums: Vec<f64> = (0..mel.num_frames).map(|t| mel.frame(t).iter().sum()).collect();
    let mut o = vec![0.0; sums.len()];
    for t in 1..sums.len() {
        o[t] = (sums[t] - sums[t - 1]).max(0.0);
    }
    o
}

/// Onset times from mel energy. Each frame is stamped at its window centre.
pub fn audio_beats_from_mel(mel: &MelEnergy, win_seconds: f64, cfg: &OnsetConfig) -> Result<BeatSet> {
    let o = onset_strength(mel);
    let peak = o.iter().cloned().fold(0.0, f64::max);
    let level = (0..mel.num_frames)
        .map(|t| mel.frame(t).iter().sum::<f64>())
        .fold(0.0, f64::max);
    // Rises at roundoff level relative to the signal are not onsets.
    if peak <= 1e-9 * level || peak == 0.0 {
        return BeatSet::new(Vec::new(), BeatSource::Audio);
    }
    let gap = (cfg.min_gap_seconds / mel.hop_seconds).round().max(1.0) as usize;
    let thresh = cfg.rel_threshold * peak;
    let mut out = Vec::new();
    for t in 0..o.len() {
        if o[t] < thresh || o[t] == 0.0 {
            continue;
        }
        let (lo, hi) = (t.saturating_sub(gap), (t + gap).min(o.len() - 1));
        // First index of the window maximum wins ties.
        let is_peak = (lo..=hi).all(|k| if k < t { o[k] < o[t] } else { o[k] <= o[t] });
        if is_peak {
            out.push(t as f64 * mel.hop_seconds + win_seconds / 2.0);
        }
    }
    BeatSet::new(out, BeatSource::Audio)
}

pub fn detect_audio_beats(signal: &AudioSignal, mel_cfg: &MelConfig, cfg: &OnsetConfig) -> Result<BeatSet> {
    audio_beats_from_mel(&mel_energy(signal, mel_cfg)?, mel_cfg.win_seconds, cfg)
}

/// `v_t = Σ_{j ∈ joints} ‖J_{t+1,j} − J_{t,j}‖₂`, length `T − 1`.
pub fn joint_velocity(pos: &JointPositions, joints: &[usize]) -> Result<Vec<f64>> {
    if pos.num_frames < 2 {
        return Err(Error::contract("velocity needs at least 2 frames"));
    }
    if let Some(&j) = joints.iter().find(|&&j| j >= pos.num_joints) {
        return Err(Error::contract(format!("joint {j} out of range for {} joints", pos.num_joints)));
    }
    Ok((0..pos.num_frames - 1)
        .map(|t| {
            joints
                .iter()
                .map(|&j| {
                    let (a, b) = (pos.joint(t, j), pos.joint(t + 1, j));
                    ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
                })
                .sum()
        })
        .collect())
}

/// Velocity sample `t` sits between frames `t` and `t + 1`.
fn velocity_time(t: usize, fps: f64) -> f64 {
    (t as f64 + 0.5) / fps
}

/// Every strict local minimum of `v`.
pub fn strict_minima(v: &[f64]) -> Vec<usize> {
    (1..v.len().saturating_sub(1))
        .filter(|&t| v[t] < v[t - 1] && v[t] < v[t + 1])
        .collect()
}

/// All strict velocity minima as beats.
pub fn detect_motion_beats_bc(pos: &JointPositions, joints: &[usize]) -> Result<BeatSet> {
    if pos.num_frames < 3 {
        return Err(Error::contract("motion beats need at least 3 frames"));
    }
    let v = joint_velocity(pos, joints)?;
    let ts = strict_minima(&v).into_iter().map(|t| velocity_time(t, pos.fps)).collect();
    BeatSet::new(ts, BeatSource::MotionBc)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmoothBeatConfig {
    /// Window radius in velocity samples.
    pub w: usize,
    /// Minimum height on the inverted velocity; `None` uses mean + 0.5·std.
    pub h_min: Option<f64>,
}

impl Default for SmoothBeatConfig {
    fn default() -> Self {
        SmoothBeatConfig { w: 5, h_min: None }
    }
}

impl SmoothBeatConfig {
    pub fn validate(&self) -> Result<()> {
        if self.w == 0 {
            return Err(Error::contract("window radius must be at least 1"));
        }
        if matches!(self.h_min, Some(h) if !h.is_finite()) {
            return Err(Error::contract("h_min must be finite"));
        }
        Ok(())
    }

    /// Threshold used on `ṽ`.
    pub fn threshold(&self, inv: &[f64]) -> f64 {
        self.h_min.unwrap_or_else(|| {
            let n = inv.len() as f64;
            let mean = inv.iter().sum::<f64>() / n;
            let var = inv.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
            mean + 0.5 * var.sqrt()
        })
    }
}

/// Peaks of `ṽ` at `i ∈ [w, n − w]` whose window `[i − w, i + w − 1]` reaches
/// `h_min`, peaks at `i`, and rises then falls monotonically. Candidates
/// must also be strict local maxima, so plateaus yield nothing.
pub fn smooth_peaks(inv: &[f64], w: usize, h_min: f64) -> Vec<usize> {
    let n = inv.len();
    if w == 0 || n < 2 * w || n < 3 {
        return Vec::new();
    }
    (w.max(1)..=(n - w).min(n - 2))
        .filter(|&i| inv[i - 1] < inv[i] && inv[i] > inv[i + 1])
        .filter(|&i| {
            let win = &inv[i - w..i + w];
            let top = win.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let c1 = top >= h_min;
            let c2 = inv[i] == top;
            let rise = inv[i - w..=i].windows(2).all(|p| p[0] <= p[1]);
            let fall = inv[i..i + w].windows(2).all(|p| p[0] >= p[1]);
            c1 && c2 && rise && fall
        })
        .collect()
}

/// Velocity minima that survive the height, peak and slope conditions.
pub fn detect_motion_beats_smooth(pos: &JointPositions, joints: &[usize], cfg: &SmoothBeatConfig) -> Result<BeatSet> {
    cfg.validate()?;
    if pos.num_frames < 2 {
        return Err(Error::contract("motion beats need at least 2 frames"));
    }
    let inv: Vec<f64> = joint_velocity(pos, joints)?.into_iter().map(|x| -x).collect();
    let h = cfg.threshold(&inv);
    let ts = smooth_peaks(&inv, cfg.w, h).into_iter().map(|t| velocity_time(t, pos.fps)).collect();
    BeatSet::new(ts, BeatSource::MotionSmooth)
}

/// Mean over motion beats of `exp(−d² / 2σ²)`, `d` the distance to the
/// nearest audio beat. Either set empty gives 0.
pub fn beat_consistency(motion: &BeatSet, audio: &BeatSet, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return Err(Error::contract(format!("sigma must be positive, got {sigma}")));
    }
    if motion.is_empty() || audio.is_empty() {
        return Ok(0.0);
    }
    let a = &audio.timestamps;
    let total: f64 = motion
        .timestamps
        .iter()
        .map(|&b| {
            let k = a.partition_point(|&x| x < b);
            let mut d = f64::INFINITY;
            if k < a.len() {
                d = d.min(a[k] - b);
            }
            if k > 0 {
                d = d.min(b - a[k - 1]);
            }
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .sum();
    Ok(total / motion.len() as f64)
}
