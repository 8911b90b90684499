use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::{jerk_norms, JointPositions, MotionSequence};

/// Mean over windows and joints of the fps³-scaled jerk magnitude.
pub fn jitter_metric(pos: &JointPositions) -> Result<f64> {
    let n = jerk_norms(pos.data(), pos.num_joints, pos.fps)?;
    Ok(n.iter().sum::<f64>() / n.len() as f64)
}

/// `1/(2N(N−1)) Σ_l Σ_j ‖p_l − p_j‖₁` over all ordered frame pairs.
pub fn intra_diversity(pos: &JointPositions, exec: Exec) -> Result<f64> {
    let n = pos.num_frames;
    if n < 2 {
        return Err(Error::contract("intra-diversity needs at least 2 frames"));
    }
    let rows = exec.map(n, |l| {
        let pl = pos.frame(l);
        (0..n)
            .map(|j| pl.iter().zip(pos.frame(j)).map(|(a, b)| (a - b).abs()).sum::<f64>())
            .sum::<f64>()
    });
    Ok(rows.iter().sum::<f64>() / (2.0 * n as f64 * (n as f64 - 1.0)))
}

/// `1/(N·⌈N/2⌉) Σ_{a<b} mean|M_a − M_b|`.
pub fn inter_diversity(samples: &[MotionSequence]) -> Result<f64> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::contract("inter-diversity needs at least 2 samples"));
    }
    let len = samples[0].data().len();
    if samples.iter().any(|s| s.data().len() != len) {
        return Err(Error::contract("inter-diversity samples differ in shape"));
    }
    let mut total = 0.0;
    for a in 0..n {
        for b in a + 1..n {
            let d: f64 = samples[a].data().iter().zip(samples[b].data()).map(|(x, y)| (x - y).abs()).sum();
            total += d / len as f64;
        }
    }
    Ok(total / (n as f64 * n.div_ceil(2) as f64))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FootSliding {
    pub value: f64,
    /// Foot-frame pairs counted as in contact.
    pub contacts: usize,
    /// Set when there were no contacts and the value defaulted to 0.
    pub no_contact: bool,
}

/// Mean predicted foot displacement over the foot-frame pairs whose
/// ground-truth displacement is below `thr`.
pub fn foot_sliding(pred: &JointPositions, gt: &JointPositions, feet: &[usize], thr: f64) -> Result<FootSliding> {
    if pred.num_frames != gt.num_frames || pred.num_joints != gt.num_joints {
        return Err(Error::contract(format!(
            "foot sliding: prediction has {} frames, ground truth {}",
            pred.num_frames, gt.num_frames
        )));
    }
    if let Some(&j) = feet.iter().find(|&&j| j >= gt.num_joints) {
        return Err(Error::contract(format!("foot joint {j} out of range")));
    }
    let step = |p: &JointPositions, t: usize, j: usize| {
        let (a, b) = (p.joint(t, j), p.joint(t + 1, j));
        ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2) + (b[2] - a[2]).powi(2)).sqrt()
    };
    let (mut sum, mut count) = (0.0, 0usize);
    for t in 0..gt.num_frames.saturating_sub(1) {
        for &j in feet {
            if step(gt, t, j) < thr {
                sum += step(pred, t, j);
                count += 1;
            }
        }
    }
    Ok(if count == 0 {
        FootSliding { value: 0.0, contacts: 0, no_contact: true }
    } else {
        FootSliding { value: sum / count as f64, contacts: count, no_contact: false }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motion::MOTION_DIM;

    fn one_joint(xs: &[f64], fps: f64) -> JointPositions {
        JointPositions::new(xs.iter().flat_map(|&x| [x, 0.0, 0.0]).collect(), 1, fps).unwrap()
    }

    #[test]
    fn jitter_values() {
        assert_eq!(jitter_metric(&one_joint(&[0.0, 0.0, 0.0, 1.0], 1.0)).unwrap(), 1.0);
        assert_eq!(jitter_metric(&one_joint(&[0.0, 0.0, 0.0, 1.0], 30.0)).unwrap(), 27000.0);
        let quad: Vec<f64> = (0..10).map(|t| 0.5 * (t * t) as f64 - 2.0 * t as f64).collect();
        assert_eq!(jitter_metric(&one_joint(&quad, 30.0)).unwrap(), 0.0);
        assert!(jitter_metric(&one_joint(&[0.0; 3], 30.0)).is_err());
    }

    #[test]
    fn intra_diversity_values() {
        assert_eq!(intra_diversity(&one_joint(&[1.0, 3.0], 30.0), Exec::Sequential).unwrap(), 1.0);
        assert_eq!(intra_diversity(&one_joint(&[2.0; 5], 30.0), Exec::Parallel).unwrap(), 0.0);
        assert!(intra_diversity(&one_joint(&[2.0], 30.0), Exec::Parallel).is_err());
    }

    #[test]
    fn inter_diversity_values() {
        let a = MotionSequence::zeros(2, 30.0).unwrap();
        let b = MotionSequence::new(vec![0.3; 2 * MOTION_DIM], 30.0).unwrap();
        assert!((inter_diversity(&[a.clone(), b]).unwrap() - 0.15).abs() < 1e-12);
        assert_eq!(inter_diversity(&[a.clone(), a.clone(), a.clone()]).unwrap(), 0.0);
        assert!(inter_diversity(&[a.clone()]).is_err());
        assert!(inter_diversity(&[a, MotionSequence::zeros(3, 30.0).unwrap()]).is_err());
    }

    #[test]
    fn foot_sliding_values() {
        let gt = one_joint(&[0.0; 5], 30.0);
        let pred = one_joint(&[0.0, 0.05, 0.1, 0.15, 0.2], 30.0);
        let fs = foot_sliding(&pred, &gt, &[0], 1e-2).unwrap();
        assert!((fs.value - 0.05).abs() < 1e-12);
        assert_eq!(fs.contacts, 4);
        assert_eq!(foot_sliding(&gt, &gt, &[0], 1e-2).unwrap().value, 0.0);
        let moving = foot_sliding(&pred, &pred, &[0], 1e-2).unwrap();
        assert!(moving.no_contact && moving.value == 0.0);
    }
}
