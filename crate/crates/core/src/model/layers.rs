use super::params::Bound;
use crate::autodiff::Var;
use crate::error::Result;

/// `x · W + b`.
#[derive(Clone, Copy)]
pub struct Linear<'g> {
    pub w: Var<'g>,
    pub b: Var<'g>,
}

impl<'g> Linear<'g> {
    pub fn bind(p: &Bound<'g, '_>, name: &str) -> Self {
        Linear {
            w: p.get(&format!("{name}.w")),
            b: p.get(&format!("{name}.b")),
        }
    }

    pub fn apply(&self, x: &Var<'g>) -> Result<Var<'g>> {
        x.matmul(&self.w)?.add_row(&self.b)
    }
}

/// `(1 + α) · LayerNorm(x) + β` with `α`, `β` broadcast over rows.
pub fn modulated_norm<'g>(x: &Var<'g>, alpha: &Var<'g>, beta: &Var<'g>) -> Result<Var<'g>> {
    x.layer_norm().mul_row(&alpha.add_scalar(1.0))?.add_row(beta)
}

/// `[sin(t·ω_i) | cos(t·ω_i)]` with `ω_i = 10000^(−i / (dim/2))`; odd widths get a trailing zero.
pub fn timestep_features(t: usize, dim: usize) -> Vec<f64> {
    let half = dim / 2;
    let mut out = vec![0.0; dim];
    for i in 0..half {
        let w = (-(10_000f64.ln()) * i as f64 / half as f64).exp();
        let (s, c) = (t as f64 * w).sin_cos();
        out[i] = s;
        out[half + i] = c;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttnSpec {
    pub heads: usize,
    pub head_dim: usize,
    pub rope_base: f64,
}

/// Split into heads, RMS-normalize each head with a shared learnable scale,
/// then rotate by `positions`.
pub fn qk_heads<'g>(x: &Var<'g>, scale: &Var<'g>, positions: &[f64], spec: &AttnSpec) -> Result<Vec<Var<'g>>> {
    (0..spec.heads)
        .map(|h| {
            x.slice_cols(h * spec.head_dim, spec.head_dim)?
                .rms_norm()
                .mul_row(scale)?
                .rope(positions, spec.head_dim, spec.rope_base)
        })
        .collect()
}

pub fn v_heads<'g>(x: &Var<'g>, spec: &AttnSpec) -> Result<Vec<Var<'g>>> {
    (0..spec.heads).map(|h| x.slice_cols(h * spec.head_dim, spec.head_dim)).collect()
}

/// Scaled dot-product attention per head, heads concatenated along columns.
pub fn attention<'g>(q: &[Var<'g>], k: &[Var<'g>], v: &[Var<'g>], head_dim: usize) -> Result<Var<'g>> {
    let scale = 1.0 / (head_dim as f64).sqrt();
    let heads = q
        .iter()
        .zip(k)
        .zip(v)
        .map(|((q, k), v)| q.matmul(&k.transpose())?.scale(scale).softmax().matmul(v))
        .collect::<Result<Vec<_>>>()?;
    Var::concat_cols(&heads)
}

pub fn positions(n: usize) -> Vec<f64> {
    (0..n).map(|i| i as f64).collect()
}
