//! Motion data model: rot6d frames, normalization statistics, a fixed-offset
//! kinematic tree and forward-process noising.

mod file;
mod kinematics;
mod noising;
mod rot6d;
mod skeleton;
mod stats;

pub use file::{read_motion, write_motion, MOTION_MAGIC};
pub use kinematics::{
    forward_kinematics, fk_var, jerk_norms, jerk_norms_var, JointPositions,
};
pub use noising::q_sample;
pub use rot6d::{rot6d_to_matrix, rot6d_to_matrix_regularized, Mat3};
pub use skeleton::Skeleton;
pub use stats::{compute_stats, NormStats, STD_FLOOR};

use crate::error::{Error, Result};

pub const NUM_JOINTS: usize = 55;
pub const ROT6D_DIM: usize = NUM_JOINTS * 6;
pub const TRANS_DIM: usize = 3;
/// 55 joints × rot6d + root translation.
pub const MOTION_DIM: usize = ROT6D_DIM + TRANS_DIM;

/// `T × 333` motion frames with a frame rate and a per-frame validity mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MotionSequence {
    frames: Vec<f64>,
    pub fps: f64,
    pub mask: Vec<bool>,
}

impl MotionSequence {
    pub fn new(frames: Vec<f64>, fps: f64) -> Result<Self> {
        let t = frames.len() / MOTION_DIM;
        Self::with_mask(frames, fps, vec![true; t])
    }

    pub fn with_mask(frames: Vec<f64>, fps: f64, mask: Vec<bool>) -> Result<Self> {
        if frames.is_empty() || frames.len() % MOTION_DIM != 0 {
            return Err(Error::contract(format!(
                "motion buffer of {} values is not a positive multiple of {MOTION_DIM}",
                frames.len()
            )));
        }
        if !(fps > 0.0 && fps.is_finite()) {
            return Err(Error::contract(format!("fps must be positive, got {fps}")));
        }
        if mask.len() != frames.len() / MOTION_DIM {
            return Err(Error::contract(format!(
                "mask has {} entries for {} frames",
                mask.len(),
                frames.len() / MOTION_DIM
            )));
        }
        Ok(MotionSequence { frames, fps, mask })
    }

    pub fn zeros(num_frames: usize, fps: f64) -> Result<Self> {
        Self::new(vec![0.0; num_frames * MOTION_DIM], fps)
    }

    /// All joints at identity rotation, zero translation.
    pub fn rest(num_frames: usize, fps: f64) -> Result<Self> {
        let mut frames = vec![0.0; num_frames * MOTION_DIM];
        for f in frames.chunks_mut(MOTION_DIM) {
            for j in 0..NUM_JOINTS {
                f[j * 6] = 1.0;
                f[j * 6 + 4] = 1.0;
            }
        }
        Self::new(frames, fps)
    }

    pub fn num_frames(&self) -> usize {
        self.frames.len() / MOTION_DIM
    }

    pub fn data(&self) -> &[f64] {
        &self.frames
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.frames
    }

    pub fn into_data(self) -> Vec<f64> {
        self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.frames[t * MOTION_DIM..(t + 1) * MOTION_DIM]
    }

    pub fn frame_mut(&mut self, t: usize) -> &mut [f64] {
        &mut self.frames[t * MOTION_DIM..(t + 1) * MOTION_DIM]
    }

    pub fn rot6d(&self, t: usize) -> &[f64] {
        &self.frame(t)[..ROT6D_DIM]
    }

    pub fn translation(&self, t: usize) -> [f64; 3] {
        let f = self.frame(t);
        [f[ROT6D_DIM], f[ROT6D_DIM + 1], f[ROT6D_DIM + 2]]
    }

    pub fn duration(&self) -> f64 {
        self.num_frames() as f64 / self.fps
    }

    /// Frames `start..start + len` as a new sequence.
    pub fn slice(&self, start: usize, len: usize) -> Result<Self> {
        if len == 0 || start + len > self.num_frames() {
            return Err(Error::contract(format!(
                "slice {start}..{} of a {}-frame sequence",
                start + len,
                self.num_frames()
            )));
        }
        Self::with_mask(
            self.frames[start * MOTION_DIM..(start + len) * MOTION_DIM].to_vec(),
            self.fps,
            self.mask[start..start + len].to_vec(),
        )
    }

    /// Copy with the root translation zeroed.
    pub fn without_translation(&self) -> Self {
        let mut out = self.clone();
        for f in out.frames.chunks_mut(MOTION_DIM) {
            f[ROT6D_DIM..].fill(0.0);
        }
        out
    }

    pub fn mask_weights(&self) -> Vec<f64> {
        self.mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect()
    }
}
