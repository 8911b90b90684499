//! Plain-loop reference implementations used as oracles by the integration
//! tests. Nothing here calls into the crate's numeric kernels.
#![allow(dead_code)]

use std::f64::consts::PI;

use gesture_dit::model::ParamStore;
use nalgebra::DMatrix;

const EPS: f64 = 1e-6;

/// Row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len());
        Mat { rows, cols, data }
    }

    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn cols_range(&self, start: usize, len: usize) -> Mat {
        let mut out = Vec::with_capacity(self.rows * len);
        for r in 0..self.rows {
            out.extend_from_slice(&self.row(r)[start..start + len]);
        }
        Mat::new(self.rows, len, out)
    }

    pub fn rows_range(&self, start: usize, len: usize) -> Mat {
        Mat::new(len, self.cols, self.data[start * self.cols..(start + len) * self.cols].to_vec())
    }

    pub fn stack(a: &Mat, b: &Mat) -> Mat {
        assert_eq!(a.cols, b.cols);
        Mat::new(a.rows + b.rows, a.cols, [a.data.clone(), b.data.clone()].concat())
    }

    pub fn side_by_side(parts: &[Mat]) -> Mat {
        let rows = parts[0].rows;
        let cols = parts.iter().map(|p| p.cols).sum();
        let mut out = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                out.extend_from_slice(p.row(r));
            }
        }
        Mat::new(rows, cols, out)
    }

    pub fn max_abs_diff(&self, other: &[f64]) -> f64 {
        assert_eq!(self.data.len(), other.len());
        self.data.iter().zip(other).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }
}

/// `x · W + b` with `W` and `b` read from `store`.
pub fn linear(x: &Mat, store: &ParamStore, name: &str) -> Mat {
    let w = store.get(&format!("{name}.w")).unwrap();
    let b = store.get(&format!("{name}.b")).unwrap();
    let (inp, out) = (w.shape()[0], w.shape()[1]);
    assert_eq!(inp, x.cols);
    let mut y = vec![0.0; x.rows * out];
    for r in 0..x.rows {
        for o in 0..out {
            let mut acc = b.data()[o];
            for i in 0..inp {
                acc += x.at(r, i) * w.data()[i * out + o];
            }
            y[r * out + o] = acc;
        }
    }
    Mat::new(x.rows, out, y)
}

/// `(1 + α) · LayerNorm(x) + β`.
pub fn modulated_norm(x: &Mat, alpha: &[f64], beta: &[f64]) -> Mat {
    let mut out = Vec::with_capacity(x.data.len());
    for r in 0..x.rows {
        let row = x.row(r);
        let n = row.len() as f64;
        let mean = row.iter().sum::<f64>() / n;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        for (c, v) in row.iter().enumerate() {
            out.push((1.0 + alpha[c]) * (v - mean) / (var + EPS).sqrt() + beta[c]);
        }
    }
    Mat::new(x.rows, x.cols, out)
}

pub fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + ((2.0 / PI).sqrt() * (x + 0.044715 * x.powi(3))).tanh())
}

pub fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// One head's queries or keys: RMS-normalize, scale, rotate pairs `(i, i + d/2)`.
fn qk_head(x: &Mat, head: usize, d: usize, scale: &[f64], pos: &[f64], base: f64) -> Mat {
    let half = d / 2;
    let mut out = Vec::with_capacity(x.rows * d);
    for r in 0..x.rows {
        let h = &x.row(r)[head * d..(head + 1) * d];
        let rms = (h.iter().map(|v| v * v).sum::<f64>() / d as f64 + EPS).sqrt();
        let n: Vec<f64> = h.iter().zip(scale).map(|(v, s)| v / rms * s).collect();
        let mut rot = n.clone();
        for i in 0..half {
            let angle = pos[r] * base.powf(-(2.0 * i as f64) / d as f64);
            let (s, c) = angle.sin_cos();
            rot[i] = n[i] * c - n[i + half] * s;
            rot[i + half] = n[i] * s + n[i + half] * c;
        }
        out.extend(rot);
    }
    Mat::new(x.rows, d, out)
}

/// Multi-head softmax attention with every query attending to every key.
pub fn attention(q: &[Mat], k: &[Mat], v: &[Mat], d: usize) -> Mat {
    let heads: Vec<Mat> = q
        .iter()
        .zip(k)
        .zip(v)
        .map(|((q, k), v)| {
            let mut out = vec![0.0; q.rows * d];
            for i in 0..q.rows {
                let scores: Vec<f64> = (0..k.rows)
                    .map(|j| (0..d).map(|c| q.at(i, c) * k.at(j, c)).sum::<f64>() / (d as f64).sqrt())
                    .collect();
                let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let z: f64 = e.iter().sum();
                for j in 0..k.rows {
                    for c in 0..d {
                        out[i * d + c] += e[j] / z * v.at(j, c);
                    }
                }
            }
            Mat::new(q.rows, d, out)
        })
        .collect();
    Mat::side_by_side(&heads)
}

pub struct Heads {
    pub heads: usize,
    pub head_dim: usize,
    pub rope_base: f64,
}

impl Heads {
    fn split_qk(&self, x: &Mat, scale: &[f64], pos: &[f64]) -> Vec<Mat> {
        (0..self.heads)
            .map(|h| qk_head(x, h, self.head_dim, scale, pos, self.rope_base))
            .collect()
    }

    fn split_v(&self, x: &Mat) -> Vec<Mat> {
        (0..self.heads).map(|h| x.cols_range(h * self.head_dim, self.head_dim)).collect()
    }
}

fn positions(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}

fn gated_add(x: &Mat, y: &Mat, gate: &[f64]) -> Mat {
    let data = x
        .data
        .iter()
        .zip(&y.data)
        .enumerate()
        .map(|(i, (a, b))| a + b * gate[i % x.cols])
        .collect();
    Mat::new(x.rows, x.cols, data)
}

struct Pre {
    q: Mat,
    k: Mat,
    v: Mat,
    m: Vec<Vec<f64>>,
}

fn stream_pre(x: &Mat, cond: &[f64], store: &ParamStore, prefix: &str, spec: &Heads) -> Pre {
    let h = spec.heads * spec.head_dim;
    let m = linear(&Mat::new(1, cond.len(), cond.to_vec()), store, &format!("{prefix}.mod"));
    let m: Vec<Vec<f64>> = (0..6).map(|i| m.data[i * h..(i + 1) * h].to_vec()).collect();
    let qkv = linear(&modulated_norm(x, &m[0], &m[1]), store, &format!("{prefix}.qkv"));
    Pre {
        q: qkv.cols_range(0, h),
        k: qkv.cols_range(h, h),
        v: qkv.cols_range(2 * h, h),
        m,
    }
}

fn stream_post(x: &Mat, attn: &Mat, pre: &Pre, store: &ParamStore, prefix: &str) -> Mat {
    let m = &pre.m;
    let x = gated_add(x, &linear(attn, store, &format!("{prefix}.proj")), &m[2]);
    let mut hidden = linear(&modulated_norm(&x, &m[3], &m[4]), store, &format!("{prefix}.mlp_in"));
    hidden.data.iter_mut().for_each(|v| *v = gelu(*v));
    gated_add(&x, &linear(&hidden, store, &format!("{prefix}.mlp_out")), &m[5])
}

/// Dual-stream block: both modalities' tokens are concatenated into one
/// sequence before a single attention, then split back.
pub fn dual_stream_block(
    xa: &Mat,
    xm: &Mat,
    cond: &[f64],
    store: &ParamStore,
    block: usize,
    spec: &Heads,
) -> (Mat, Mat) {
    let (pa_name, pm_name) = (format!("dual{block}.audio"), format!("dual{block}.motion"));
    let pa = stream_pre(xa, cond, store, &pa_name, spec);
    let pm = stream_pre(xm, cond, store, &pm_name, spec);
    let scale = |name: &str| store.get(name).unwrap().data().to_vec();
    let (pos_a, pos_m) = (positions(xa.rows), positions(xm.rows));
    let joint_rows = |a: Vec<Mat>, m: Vec<Mat>| -> Vec<Mat> { a.iter().zip(&m).map(|(a, m)| Mat::stack(a, m)).collect() };
    let q = joint_rows(
        spec.split_qk(&pa.q, &scale(&format!("{pa_name}.q_norm")), &pos_a),
        spec.split_qk(&pm.q, &scale(&format!("{pm_name}.q_norm")), &pos_m),
    );
    let k = joint_rows(
        spec.split_qk(&pa.k, &scale(&format!("{pa_name}.k_norm")), &pos_a),
        spec.split_qk(&pm.k, &scale(&format!("{pm_name}.k_norm")), &pos_m),
    );
    let v = joint_rows(spec.split_v(&pa.v), spec.split_v(&pm.v));
    let joint = attention(&q, &k, &v, spec.head_dim);
    let out_a = stream_post(xa, &joint.rows_range(0, xa.rows), &pa, store, &pa_name);
    let out_m = stream_post(xm, &joint.rows_range(xa.rows, xm.rows), &pm, store, &pm_name);
    (out_a, out_m)
}

/// Fusion block on already-concatenated tokens.
pub fn fusion_block(x: &Mat, cond: &[f64], store: &ParamStore, block: usize, pos: &[f64], spec: &Heads) -> Mat {
    let prefix = format!("fusion{block}");
    let h = spec.heads * spec.head_dim;
    let m = linear(&Mat::new(1, cond.len(), cond.to_vec()), store, &format!("{prefix}.mod"));
    let m: Vec<Vec<f64>> = (0..3).map(|i| m.data[i * h..(i + 1) * h].to_vec()).collect();
    let y = linear(&modulated_norm(x, &m[0], &m[1]), store, &format!("{prefix}.fc1"));
    let scale = |name: &str| store.get(&format!("{prefix}.{name}")).unwrap().data().to_vec();
    let q = spec.split_qk(&y.cols_range(0, h), &scale("q_norm"), pos);
    let k = spec.split_qk(&y.cols_range(h, h), &scale("k_norm"), pos);
    let v = spec.split_v(&y.cols_range(2 * h, h));
    let a = attention(&q, &k, &v, spec.head_dim);
    let mut act = y.cols_range(3 * h, y.cols - 3 * h);
    act.data.iter_mut().for_each(|v| *v = gelu(*v));
    let z = linear(&Mat::side_by_side(&[a, act]), store, &format!("{prefix}.fc2"));
    gated_add(x, &z, &m[2])
}

/// Log-mel energy by a direct O(N²) DFT and independently built HTK filters.
pub fn naive_mel(samples: &[f64], sr: u32, n_mels: usize, win: usize, hop: usize) -> Vec<Vec<f64>> {
    let n_fft = win.next_power_of_two();
    let bins = n_fft / 2 + 1;
    let mel = |f: f64| 2595.0 * (1.0 + f / 700.0).log10();
    let hz = |m: f64| 700.0 * (10f64.powf(m / 2595.0) - 1.0);
    let top = mel(sr as f64 / 2.0);
    let edges: Vec<f64> = (0..n_mels + 2).map(|i| hz(top * i as f64 / (n_mels + 1) as f64)).collect();
    let frames = if samples.len() < win { 0 } else { (samples.len() - win) / hop + 1 };
    (0..frames)
        .map(|t| {
            let x: Vec<f64> = (0..win)
                .map(|i| samples[t * hop + i] * (0.5 - 0.5 * (2.0 * PI * i as f64 / win as f64).cos()))
                .collect();
            let power: Vec<f64> = (0..bins)
                .map(|k| {
                    let (mut re, mut im) = (0.0, 0.0);
                    for (i, v) in x.iter().enumerate() {
                        let a = -2.0 * PI * (k * i) as f64 / n_fft as f64;
                        re += v * a.cos();
                        im += v * a.sin();
                    }
                    re * re + im * im
                })
                .collect();
            (0..n_mels)
                .map(|m| {
                    let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
                    let p: f64 = power
                        .iter()
                        .enumerate()
                        .map(|(k, p)| {
                            let f = k as f64 * sr as f64 / n_fft as f64;
                            let w = if f <= lo || f >= hi {
                                0.0
                            } else if f <= c {
                                (f - lo) / (c - lo)
                            } else {
                                (hi - f) / (hi - c)
                            };
                            w * p
                        })
                        .sum();
                    (p + 1e-10).ln().exp()
                })
                .collect()
        })
        .collect()
}

/// Principal square root by the Denman–Beavers iteration.
pub fn denman_beavers_sqrt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let mut y = a.clone();
    let mut z = DMatrix::<f64>::identity(n, n);
    for _ in 0..100 {
        let yi = y.clone().try_inverse().expect("invertible iterate");
        let zi = z.clone().try_inverse().expect("invertible iterate");
        let ny = (&y + zi) * 0.5;
        let nz = (&z + yi) * 0.5;
        let done = (&ny - &y).norm() < 1e-15 * ny.norm();
        y = ny;
        z = nz;
        if done {
            break;
        }
    }
    y
}

/// `‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2 (Σ₁ Σ₂)^½)`.
pub fn frechet_reference(mu1: &[f64], s1: &DMatrix<f64>, mu2: &[f64], s2: &DMatrix<f64>) -> f64 {
    let mean: f64 = mu1.iter().zip(mu2).map(|(a, b)| (a - b) * (a - b)).sum();
    let cross = denman_beavers_sqrt(&(s1 * s2));
    mean + s1.trace() + s2.trace() - 2.0 * cross.trace()
}

/// Sample mean and unbiased covariance of feature rows.
pub fn mean_cov(rows: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let n = rows.len();
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|c| rows.iter().map(|r| r[c]).sum::<f64>() / n as f64).collect();
    let cov = DMatrix::from_fn(d, d, |i, j| {
        rows.iter().map(|r| (r[i] - mean[i]) * (r[j] - mean[j])).sum::<f64>() / (n - 1) as f64
    });
    (mean, cov)
}
