//! Evaluation suite: beat detection and beat consistency (plain and
//! slope-constrained), Fréchet distance, diversity, jitter and foot sliding.

mod beats;
mod fgd;
mod quality;

pub use beats::{
    audio_beats_from_mel, beat_consistency, detect_audio_beats, detect_motion_beats_bc,
    detect_motion_beats_smooth, joint_velocity, onset_strength, smooth_peaks, strict_minima, BeatSet,
    BeatSource, OnsetConfig, SmoothBeatConfig,
};
pub use fgd::{fgd, frechet_distance, psd_sqrt, FeatureEncoder, GaussianFit, WindowStatsEncoder};
pub use quality::{foot_sliding, inter_diversity, intra_diversity, jitter_metric, FootSliding};

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::audio::{AudioSignal, MelConfig};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{forward_kinematics, MotionSequence, Skeleton};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricConfig {
    /// Beat consistency kernel width, seconds.
    pub sigma: f64,
    pub smooth: SmoothBeatConfig,
    pub onset: OnsetConfig,
    pub mel: MelConfig,
    /// Foot contact displacement threshold, meters per frame.
    pub foot_threshold: f64,
    pub encoder: WindowStatsEncoder,
    pub exec: Exec,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            sigma: 0.1,
            smooth: SmoothBeatConfig::default(),
            onset: OnsetConfig::default(),
            mel: MelConfig::default(),
            foot_threshold: 1e-2,
            encoder: WindowStatsEncoder::default(),
            exec: Exec::default(),
        }
    }
}

/// A raw value and its value under the reporting scale. A column labelled
/// `×10^k` shows `raw / 10^k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub raw: f64,
    pub reported: f64,
    pub scale_exp: i32,
}

impl MetricValue {
    pub fn new(raw: f64, scale_exp: i32) -> Self {
        MetricValue {
            raw,
            reported: raw / 10f64.powi(scale_exp),
            scale_exp,
        }
    }
}

pub const FGD_SCALE: i32 = -1;
pub const BC_SCALE: i32 = -1;
pub const SMOOTH_BC_SCALE: i32 = -1;
pub const INTRA_DIV_SCALE: i32 = 0;
pub const JITTER_SCALE: i32 = 2;
pub const FOOT_SLIDING_SCALE: i32 = -2;
pub const INTER_DIV_SCALE: i32 = -2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    /// Absent when either clip yields fewer than two encoder windows.
    pub fgd: Option<MetricValue>,
    pub bc: MetricValue,
    pub smooth_bc: MetricValue,
    pub intra_div: MetricValue,
    pub jitter: MetricValue,
    pub foot_sliding: MetricValue,
    /// Absent with fewer than two samples.
    pub inter_div: Option<MetricValue>,
    pub foot_contacts: usize,
    pub warnings: Vec<String>,
    pub config: MetricConfig,
}

impl MetricReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report json")
    }

    /// Aligned plain-text table.
    pub fn to_table(&self) -> String {
        let rows: [(&str, Option<MetricValue>); 7] = [
            ("FGD", self.fgd),
            ("BC", Some(self.bc)),
            ("Smooth-BC", Some(self.smooth_bc)),
            ("Intra-Diversity", Some(self.intra_div)),
            ("Jitter", Some(self.jitter)),
            ("Foot-Sliding", Some(self.foot_sliding)),
            ("Inter-Diversity", self.inter_div),
        ];
        let mut s = format!("{:<16} {:>14} {:>14} {:>8}\n", "metric", "raw", "reported", "scale");
        for (name, v) in rows {
            match v {
                Some(v) => {
                    let scale = if v.scale_exp == 0 { "1".to_string() } else { format!("x10^{}", v.scale_exp) };
                    let _ = writeln!(s, "{name:<16} {:>14.6} {:>14.6} {scale:>8}", v.raw, v.reported);
                }
                None => {
                    let _ = writeln!(s, "{name:<16} {:>14} {:>14} {:>8}", "n/a", "n/a", "");
                }
            }
        }
        for w in &self.warnings {
            let _ = writeln!(s, "warning: {w}");
        }
        s
    }
}

/// Report plus the beat sets behind it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub report: MetricReport,
    pub audio_beats: BeatSet,
    pub bc_beats: BeatSet,
    pub smooth_beats: BeatSet,
}

/// All metrics for `pred` against `gt` and the audio. `extra` are further
/// samples for the same audio; inter-diversity uses `pred` plus `extra`.
pub fn evaluate(
    pred: &MotionSequence,
    gt: &MotionSequence,
    audio: &AudioSignal,
    extra: &[MotionSequence],
    skeleton: &Skeleton,
    cfg: &MetricConfig,
) -> Result<Evaluation> {
    if pred.num_frames() != gt.num_frames() {
        return Err(Error::contract(format!(
            "prediction has {} frames, ground truth has {}",
            pred.num_frames(),
            gt.num_frames()
        )));
    }
    let mut warnings = Vec::new();
    let pos = forward_kinematics(pred, skeleton)?;
    let gt_pos = forward_kinematics(gt, skeleton)?;
    let local = forward_kinematics(&pred.without_translation(), skeleton)?;
    let gt_local = forward_kinematics(&gt.without_translation(), skeleton)?;

    let (real, fake) = (cfg.encoder.encode(&gt_local)?, cfg.encoder.encode(&local)?);
    let fgd_v = if real.len() < 2 || fake.len() < 2 {
        warnings.push(format!("clip too short for FGD ({} encoder windows)", real.len().min(fake.len())));
        None
    } else {
        Some(MetricValue::new(fgd(&real, &fake)?, FGD_SCALE))
    };

    let joints = skeleton.beat_joints();
    let audio_beats = detect_audio_beats(audio, &cfg.mel, &cfg.onset)?;
    let bc_beats = detect_motion_beats_bc(&pos, &joints)?;
    let smooth_beats = detect_motion_beats_smooth(&pos, &joints, &cfg.smooth)?;
    let bc = beat_consistency(&bc_beats, &audio_beats, cfg.sigma)?;
    let smooth_bc = beat_consistency(&smooth_beats, &audio_beats, cfg.sigma)?;

    let fs = foot_sliding(&pos, &gt_pos, &skeleton.foot_joints, cfg.foot_threshold)?;
    if fs.no_contact {
        warnings.push("no foot contact frames in ground truth; foot sliding set to 0".into());
    }
    let inter = if extra.is_empty() {
        None
    } else {
        let all: Vec<MotionSequence> = std::iter::once(pred.clone()).chain(extra.iter().cloned()).collect();
        Some(MetricValue::new(inter_diversity(&all)?, INTER_DIV_SCALE))
    };
    let report = MetricReport {
        fgd: fgd_v,
        bc: MetricValue::new(bc, BC_SCALE),
        smooth_bc: MetricValue::new(smooth_bc, SMOOTH_BC_SCALE),
        intra_div: MetricValue::new(intra_diversity(&local, cfg.exec)?, INTRA_DIV_SCALE),
        jitter: MetricValue::new(jitter_metric(&pos)?, JITTER_SCALE),
        foot_sliding: MetricValue::new(fs.value, FOOT_SLIDING_SCALE),
        inter_div: inter,
        foot_contacts: fs.contacts,
        warnings,
        config: cfg.clone(),
    };
    Ok(Evaluation { report, audio_beats, bc_beats, smooth_beats })
}

/// Raw BC on noise motion must reach this.
pub const NOISE_BC_MIN: f64 = 0.5;
/// Raw Smooth-BC on noise motion must stay at or below this.
pub const NOISE_SMOOTH_BC_MAX: f64 = 0.02;
/// Per-coordinate standard deviation of the rot6d noise.
pub const NOISE_STD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseDiagnostic {
    pub seed: u64,
    pub frames: usize,
    pub audio_beats: usize,
    pub bc_beats: usize,
    pub smooth_beats: usize,
    pub bc: f64,
    pub smooth_bc: f64,
    /// False when the audio has no beats; both scores are then 0.
    pub applicable: bool,
    pub passed: bool,
}

impl NoiseDiagnostic {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("diagnostic json")
    }
}

/// Score seeded Gaussian-noise motion against the audio with both BC variants.
pub fn noise_diagnostic(
    audio: &AudioSignal,
    seed: u64,
    fps: f64,
    skeleton: &Skeleton,
    cfg: &MetricConfig,
) -> Result<NoiseDiagnostic> {
    let frames = ((audio.duration() * fps).round() as usize).max(3);
    let motion = crate::toy::noise_motion(frames, fps, NOISE_STD, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let pos = forward_kinematics(&motion, skeleton)?;
    let joints = skeleton.beat_joints();
    let audio_beats = detect_audio_beats(audio, &cfg.mel, &cfg.onset)?;
    let bc_beats = detect_motion_beats_bc(&pos, &joints)?;
    let smooth_beats = detect_motion_beats_smooth(&pos, &joints, &cfg.smooth)?;
    let bc = beat_consistency(&bc_beats, &audio_beats, cfg.sigma)?;
    let smooth_bc = beat_consistency(&smooth_beats, &audio_beats, cfg.sigma)?;
    let applicable = !audio_beats.is_empty();
    Ok(NoiseDiagnostic {
        seed,
        frames,
        audio_beats: audio_beats.len(),
        bc_beats: bc_beats.len(),
        smooth_beats: smooth_beats.len(),
        bc,
        smooth_bc,
        applicable,
        passed: !applicable || (bc >= NOISE_BC_MIN && smooth_bc <= NOISE_SMOOTH_BC_MAX),
    })
}
