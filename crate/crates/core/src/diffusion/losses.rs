use serde::{Deserialize, Serialize};

use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::motion::{fk_var, jerk_norms_var, MotionSequence, Skeleton, MOTION_DIM, ROT6D_DIM, TRANS_DIM};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub rot6d: f64,
    pub trans: f64,
    pub jitter: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rot6d: 1.0,
            trans: 1.0,
            jitter: 1e-9,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if [self.rot6d, self.trans, self.jitter].iter().all(|w| *w >= 0.0 && w.is_finite()) {
            Ok(())
        } else {
            Err(Error::contract("loss weights must be finite and nonnegative"))
        }
    }
}

/// Jitter weights compared in the sensitivity sweep.
pub const JITTER_SWEEP: [f64; 5] = [0.0, 1e-11, 1e-10, 1e-9, 1e-8];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub rot6d: f64,
    pub trans: f64,
    pub jitter: f64,
    pub total: f64,
}

/// `Σ_t M_t · rowsum(err_t) / (dim · Σ_t M_t)`.
fn masked_row_mean<'g>(sq: &Var<'g>, mask: &[bool], dim: usize) -> Result<Var<'g>> {
    let valid = mask.iter().filter(|&&m| m).count();
    if valid == 0 {
        return Err(Error::contract("every frame is masked out"));
    }
    let w: Vec<f64> = mask.iter().map(|&m| if m { 1.0 } else { 0.0 }).collect();
    Ok(sq.scale_rows(&w)?.sum().scale(1.0 / (valid as f64 * dim as f64)))
}

fn check_mask(rows: usize, mask: &[bool]) -> Result<()> {
    if mask.len() != rows {
        return Err(Error::contract(format!("mask has {} entries for {rows} frames", mask.len())));
    }
    Ok(())
}

/// Mask-weighted mean over frames of the per-frame squared error divided by 330.
pub fn loss_rot6d<'g>(pred: &Var<'g>, gt: &Var<'g>, mask: &[bool]) -> Result<Var<'g>> {
    check_mask(pred.dims2().0, mask)?;
    masked_row_mean(&pred.sub(gt)?.square(), mask, ROT6D_DIM)
}

/// As [`loss_rot6d`] for the 3 translation columns.
pub fn loss_trans<'g>(pred: &Var<'g>, gt: &Var<'g>, mask: &[bool]) -> Result<Var<'g>> {
    check_mask(pred.dims2().0, mask)?;
    masked_row_mean(&pred.sub(gt)?.square(), mask, TRANS_DIM)
}

/// A jerk window starting at `t` is valid when frames `t..t+4` all are.
pub fn jerk_window_mask(mask: &[bool]) -> Vec<bool> {
    mask.windows(4).map(|w| w.iter().all(|&m| m)).collect()
}

/// Squared difference of fps³-scaled jerk magnitudes, averaged over joints
/// then over valid windows. Motions are full `T × 333` rows.
pub fn loss_jitter<'g>(
    pred: &Var<'g>,
    gt: &Var<'g>,
    skeleton: &Skeleton,
    fps: f64,
    mask: &[bool],
) -> Result<Var<'g>> {
    let (frames, width) = pred.dims2();
    if frames < 4 {
        return Err(Error::contract(format!("jitter loss needs at least 4 frames, got {frames}")));
    }
    if width != MOTION_DIM || gt.dims2() != (frames, MOTION_DIM) {
        return Err(Error::shape("loss_jitter", &pred.shape(), &gt.shape()));
    }
    check_mask(frames, mask)?;
    let jerk = |m: &Var<'g>| -> Result<Var<'g>> {
        let p = fk_var(m.slice_cols(0, ROT6D_DIM)?, m.slice_cols(ROT6D_DIM, TRANS_DIM)?, skeleton)?;
        jerk_norms_var(p, fps)
    };
    let diff = jerk(pred)?.sub(&jerk(gt)?)?.square();
    masked_row_mean(&diff, &jerk_window_mask(mask), skeleton.num_joints())
}

/// `λ_rot6d · L_rot6d + λ_trans · L_trans + λ_jitter · L_jitter`.
pub fn total_loss<'g>(rot6d: &Var<'g>, trans: &Var<'g>, jitter: &Var<'g>, w: &LossWeights) -> Result<Var<'g>> {
    rot6d.scale(w.rot6d).add(&trans.scale(w.trans))?.add(&jitter.scale(w.jitter))
}

/// All three terms and the weighted total for a raw-space prediction
/// (`T × 333`) against `gt`. The jitter term is skipped (reported as 0)
/// when its weight is 0 or the clip is shorter than 4 frames.
pub fn motion_loss<'g>(
    pred: &Var<'g>,
    gt: &MotionSequence,
    skeleton: &Skeleton,
    w: &LossWeights,
) -> Result<(Var<'g>, LossBreakdown)> {
    let g: &'g Graph = pred.graph();
    let frames = gt.num_frames();
    let gt_v = g.constant(Tensor::from_matrix(frames, MOTION_DIM, gt.data().to_vec())?);
    if pred.dims2() != (frames, MOTION_DIM) {
        return Err(Error::shape("motion_loss", &pred.shape(), &[frames, MOTION_DIM]));
    }
    let rot = loss_rot6d(&pred.slice_cols(0, ROT6D_DIM)?, &gt_v.slice_cols(0, ROT6D_DIM)?, &gt.mask)?;
    let trans = loss_trans(
        &pred.slice_cols(ROT6D_DIM, TRANS_DIM)?,
        &gt_v.slice_cols(ROT6D_DIM, TRANS_DIM)?,
        &gt.mask,
    )?;
    let use_jitter = w.jitter > 0.0 && frames >= 4 && jerk_window_mask(&gt.mask).iter().any(|&m| m);
    let jit = if use_jitter {
        loss_jitter(pred, &gt_v, skeleton, gt.fps, &gt.mask)?
    } else {
        g.constant(Tensor::scalar(0.0))
    };
    let total = total_loss(&rot, &trans, &jit, w)?;
    let b = LossBreakdown {
        rot6d: rot.item(),
        trans: trans.item(),
        jitter: jit.item(),
        total: total.item(),
    };
    Ok((total, b))
}

/// Loss values without gradients.
pub fn evaluate_loss(pred: &MotionSequence, gt: &MotionSequence, skeleton: &Skeleton, w: &LossWeights) -> Result<LossBreakdown> {
    let g = Graph::new();
    let p = g.constant(Tensor::from_matrix(pred.num_frames(), MOTION_DIM, pred.data().to_vec())?);
    Ok(motion_loss(&p, gt, skeleton, w)?.1)
}
