use super::rot6d::{
    matmul3, matvec3, rot6d_regularized_vjp, rot6d_to_matrix, rot6d_to_matrix_regularized,
    transpose3, Mat3,
};
use super::{MotionSequence, Skeleton, NUM_JOINTS};
use crate::autodiff::{CustomOp, Tensor, Var};
use crate::error::{Error, Result};

/// World-space joint positions, `T × J × 3`, meters.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPositions {
    data: Vec<f64>,
    pub num_frames: usize,
    pub num_joints: usize,
    pub fps: f64,
}

impl JointPositions {
    pub fn new(data: Vec<f64>, num_joints: usize, fps: f64) -> Result<Self> {
        if num_joints == 0 || data.is_empty() || data.len() % (num_joints * 3) != 0 {
            return Err(Error::contract(format!(
                "{} position values do not split into {num_joints} joints",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite joint position".into()));
        }
        Ok(JointPositions {
            num_frames: data.len() / (num_joints * 3),
            data,
            num_joints,
            fps,
        })
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn joint(&self, t: usize, j: usize) -> [f64; 3] {
        let i = (t * self.num_joints + j) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        let w = self.num_joints * 3;
        &self.data[t * w..(t + 1) * w]
    }
}

struct FrameFk {
    local: Vec<Mat3>,
    world: Vec<Mat3>,
    pos: Vec<[f64; 3]>,
}

fn fk_frame(
    skeleton: &Skeleton,
    trans: [f64; 3],
    rot: impl Fn(usize) -> Result<Mat3>,
) -> Result<FrameFk> {
    let n = skeleton.num_joints();
    let mut local = Vec::with_capacity(n);
    let mut world: Vec<Mat3> = Vec::with_capacity(n);
    let mut pos: Vec<[f64; 3]> = Vec::with_capacity(n);
    for j in 0..n {
        let r = rot(j)?;
        let p = skeleton.parents[j];
        if p < 0 {
            world.push(r);
            pos.push(trans);
        } else {
            let p = p as usize;
            let off = matvec3(&world[p], skeleton.offsets[j]);
            pos.push([pos[p][0] + off[0], pos[p][1] + off[1], pos[p][2] + off[2]]);
            world.push(matmul3(&world[p], &r));
        }
        local.push(r);
    }
    Ok(FrameFk { local, world, pos })
}

/// Positions for every frame of `motion`; the first `skeleton.num_joints()`
/// rot6d slots drive the tree.
pub(crate) fn fk_positions(motion: &MotionSequence, skeleton: &Skeleton) -> Result<Vec<f64>> {
    let n = skeleton.num_joints();
    if n > NUM_JOINTS {
        return Err(Error::contract(format!("skeleton has {n} joints, motion carries {NUM_JOINTS}")));
    }
    let mut out = Vec::with_capacity(motion.num_frames() * n * 3);
    for t in 0..motion.num_frames() {
        let r6 = motion.rot6d(t);
        let f = fk_frame(skeleton, motion.translation(t), |j| {
            rot6d_to_matrix(&r6[j * 6..j * 6 + 6])
                .map_err(|e| Error::contract(format!("frame {t}, joint {j}: {e}")))
        })?;
        out.extend(f.pos.iter().flatten());
    }
    Ok(out)
}

/// Forward kinematics over the 55-joint tree: the root sits at the frame's
/// translation and each child at `parent + parent_world_rotation · offset`.
pub fn forward_kinematics(motion: &MotionSequence, skeleton: &Skeleton) -> Result<JointPositions> {
    if skeleton.num_joints() != NUM_JOINTS {
        return Err(Error::contract(format!(
            "forward kinematics expects a {NUM_JOINTS}-joint skeleton, got {}",
            skeleton.num_joints()
        )));
    }
    JointPositions::new(fk_positions(motion, skeleton)?, NUM_JOINTS, motion.fps)
}

struct FkOp {
    skeleton: Skeleton,
}

fn frames_of(rot6d: &Tensor, trans: &Tensor, skeleton: &Skeleton, t: usize) -> Result<FrameFk> {
    let r6 = rot6d.row(t);
    let tr = trans.row(t);
    fk_frame(skeleton, [tr[0], tr[1], tr[2]], |j| {
        Ok(rot6d_to_matrix_regularized(&r6[j * 6..j * 6 + 6]))
    })
}

impl CustomOp for FkOp {
    fn name(&self) -> &'static str {
        "forward_kinematics"
    }

    fn backward(&self, inputs: &[&Tensor], _output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let (rot6d, trans) = (inputs[0], inputs[1]);
        let sk = &self.skeleton;
        let n = sk.num_joints();
        let frames = rot6d.rows();
        let mut g_rot = vec![0.0; rot6d.numel()];
        let mut g_trans = vec![0.0; trans.numel()];
        for t in 0..frames {
            let f = frames_of(rot6d, trans, sk, t).expect("regularized fk is total");
            let mut gp: Vec<[f64; 3]> = (0..n)
                .map(|j| {
                    let i = (t * n + j) * 3;
                    [grad[i], grad[i + 1], grad[i + 2]]
                })
                .collect();
            let mut gw = vec![[[0.0; 3]; 3]; n];
            let mut gr = vec![[[0.0; 3]; 3]; n];
            for j in (0..n).rev() {
                let p = sk.parents[j];
                if p < 0 {
                    gr[j] = gw[j];
                    g_trans[t * 3..t * 3 + 3].copy_from_slice(&gp[j]);
                    continue;
                }
                let p = p as usize;
                let o = sk.offsets[j];
                for a in 0..3 {
                    gp[p][a] += gp[j][a];
                    for b in 0..3 {
                        gw[p][a][b] += gp[j][a] * o[b];
                    }
                }
                let back = matmul3(&gw[j], &transpose3(&f.local[j]));
                for a in 0..3 {
                    for b in 0..3 {
                        gw[p][a][b] += back[a][b];
                    }
                }
                gr[j] = matmul3(&transpose3(&f.world[p]), &gw[j]);
            }
            let r6 = rot6d.row(t);
            for j in 0..n {
                let g6 = rot6d_regularized_vjp(&r6[j * 6..j * 6 + 6], &gr[j]);
                let base = t * rot6d.cols() + j * 6;
                g_rot[base..base + 6].copy_from_slice(&g6);
            }
        }
        vec![Some(g_rot), Some(g_trans)]
    }
}

/// Differentiable forward kinematics: `rot6d (T × 6J')`, `trans (T × 3)` →
/// `T × 3J` positions. Uses the regularized Gram–Schmidt so gradients stay
/// finite on degenerate predictions.
pub fn fk_var<'g>(rot6d: Var<'g>, trans: Var<'g>, skeleton: &Skeleton) -> Result<Var<'g>> {
    let rv = rot6d.value();
    let tv = trans.value();
    let (frames, rc) = rv.dims2();
    let n = skeleton.num_joints();
    if rc < n * 6 || tv.dims2() != (frames, 3) {
        return Err(Error::shape("fk", rv.shape(), tv.shape()));
    }
    let mut out = Vec::with_capacity(frames * n * 3);
    for t in 0..frames {
        out.extend(frames_of(&rv, &tv, skeleton, t)?.pos.iter().flatten());
    }
    let value = Tensor::from_matrix(frames, n * 3, out)?;
    Ok(rot6d.graph().custom(
        &[rot6d, trans],
        value,
        Box::new(FkOp {
            skeleton: skeleton.clone(),
        }),
    ))
}

fn stencil(p: &[f64], w: usize, t: usize, k: usize, fps3: f64) -> f64 {
    (p[(t + 3) * w + k] - 3.0 * p[(t + 2) * w + k] + 3.0 * p[(t + 1) * w + k] - p[t * w + k]) * fps3
}

/// `‖(P[t+3] − 3P[t+2] + 3P[t+1] − P[t]) · fps³‖₂` per window start `t` and
/// joint: a `(T − 3) × J` matrix.
pub fn jerk_norms(positions: &[f64], num_joints: usize, fps: f64) -> Result<Vec<f64>> {
    let w = num_joints * 3;
    let frames = positions.len() / w;
    if frames < 4 {
        return Err(Error::contract(format!("jerk needs at least 4 frames, got {frames}")));
    }
    let fps3 = fps * fps * fps;
    let mut out = Vec::with_capacity((frames - 3) * num_joints);
    for t in 0..frames - 3 {
        for j in 0..num_joints {
            let d: f64 = (0..3).map(|a| stencil(positions, w, t, j * 3 + a, fps3).powi(2)).sum();
            out.push(d.sqrt());
        }
    }
    Ok(out)
}

struct JerkOp {
    fps: f64,
}

impl CustomOp for JerkOp {
    fn name(&self) -> &'static str {
        "jerk_norms"
    }

    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>> {
        let p = inputs[0];
        let (frames, w) = p.dims2();
        let j_count = w / 3;
        let fps3 = self.fps.powi(3);
        let pd = p.data();
        let norms = output.data();
        let mut gp = vec![0.0; p.numel()];
        for t in 0..frames - 3 {
            for j in 0..j_count {
                let n = norms[t * j_count + j];
                if n == 0.0 {
                    continue;
                }
                let g = grad[t * j_count + j];
                for a in 0..3 {
                    let k = j * 3 + a;
                    let unit = stencil(pd, w, t, k, fps3) / n;
                    let s = g * unit * fps3;
                    gp[(t + 3) * w + k] += s;
                    gp[(t + 2) * w + k] -= 3.0 * s;
                    gp[(t + 1) * w + k] += 3.0 * s;
                    gp[t * w + k] -= s;
                }
            }
        }
        vec![Some(gp)]
    }
}

/// Differentiable [`jerk_norms`] over a `T × 3J` position matrix.
/// The norm's gradient at a zero jerk is taken as zero.
pub fn jerk_norms_var<'g>(positions: Var<'g>, fps: f64) -> Result<Var<'g>> {
    let pv = positions.value();
    let (frames, w) = pv.dims2();
    if w % 3 != 0 {
        return Err(Error::contract(format!("position width {w} is not a multiple of 3")));
    }
    let out = jerk_norms(pv.data(), w / 3, fps)?;
    let value = Tensor::from_matrix(frames - 3, w / 3, out)?;
    Ok(positions
        .graph()
        .custom(&[positions], value, Box::new(JerkOp { fps })))
}
