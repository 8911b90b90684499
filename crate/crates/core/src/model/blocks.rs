use super::layers::{attention, modulated_norm, qk_heads, v_heads, AttnSpec, Linear};
use super::params::Bound;
use crate::autodiff::Var;
use crate::error::Result;

/// One modality's half of a dual-stream block.
#[derive(Clone, Copy)]
pub struct StreamParams<'g> {
    /// Produces `[α₁, β₁, γ₁, α₂, β₂, γ₂]`.
    pub modulation: Linear<'g>,
    pub qkv: Linear<'g>,
    pub q_norm: Var<'g>,
    pub k_norm: Var<'g>,
    pub proj: Linear<'g>,
    pub mlp_in: Linear<'g>,
    pub mlp_out: Linear<'g>,
}

impl<'g> StreamParams<'g> {
    pub fn bind(p: &Bound<'g, '_>, prefix: &str) -> Self {
        let l = |n: &str| Linear::bind(p, &format!("{prefix}.{n}"));
        StreamParams {
            modulation: l("mod"),
            qkv: l("qkv"),
            q_norm: p.get(&format!("{prefix}.q_norm")),
            k_norm: p.get(&format!("{prefix}.k_norm")),
            proj: l("proj"),
            mlp_in: l("mlp_in"),
            mlp_out: l("mlp_out"),
        }
    }
}

#[derive(Clone, Copy)]
pub struct DualStreamParams<'g> {
    pub audio: StreamParams<'g>,
    pub motion: StreamParams<'g>,
}

impl<'g> DualStreamParams<'g> {
    pub fn bind(p: &Bound<'g, '_>, block: usize) -> Self {
        DualStreamParams {
            audio: StreamParams::bind(p, &format!("dual{block}.audio")),
            motion: StreamParams::bind(p, &format!("dual{block}.motion")),
        }
    }
}

#[derive(Clone, Copy)]
pub struct FusionParams<'g> {
    /// Produces `[α, β, γ]`.
    pub modulation: Linear<'g>,
    /// Produces `[Q | K | V | M]`.
    pub fc1: Linear<'g>,
    pub q_norm: Var<'g>,
    pub k_norm: Var<'g>,
    pub fc2: Linear<'g>,
}

impl<'g> FusionParams<'g> {
    pub fn bind(p: &Bound<'g, '_>, block: usize) -> Self {
        let prefix = format!("fusion{block}");
        FusionParams {
            modulation: Linear::bind(p, &format!("{prefix}.mod")),
            fc1: Linear::bind(p, &format!("{prefix}.fc1")),
            q_norm: p.get(&format!("{prefix}.q_norm")),
            k_norm: p.get(&format!("{prefix}.k_norm")),
            fc2: Linear::bind(p, &format!("{prefix}.fc2")),
        }
    }
}

fn chunks<'g>(v: &Var<'g>, n: usize, width: usize) -> Result<Vec<Var<'g>>> {
    (0..n).map(|i| v.slice_cols(i * width, width)).collect()
}

struct StreamPre<'g> {
    q: Vec<Var<'g>>,
    k: Vec<Var<'g>>,
    v: Vec<Var<'g>>,
    m: Vec<Var<'g>>,
}

fn stream_pre<'g>(x: &Var<'g>, cond: &Var<'g>, p: &StreamParams<'g>, pos: &[f64], spec: &AttnSpec) -> Result<StreamPre<'g>> {
    let h = spec.heads * spec.head_dim;
    let m = chunks(&p.modulation.apply(cond)?, 6, h)?;
    let xn = modulated_norm(x, &m[0], &m[1])?;
    let qkv = p.qkv.apply(&xn)?;
    Ok(StreamPre {
        q: qk_heads(&qkv.slice_cols(0, h)?, &p.q_norm, pos, spec)?,
        k: qk_heads(&qkv.slice_cols(h, h)?, &p.k_norm, pos, spec)?,
        v: v_heads(&qkv.slice_cols(2 * h, h)?, spec)?,
        m,
    })
}

fn stream_post<'g>(x: &Var<'g>, attn: &Var<'g>, pre: &StreamPre<'g>, p: &StreamParams<'g>) -> Result<Var<'g>> {
    let m = &pre.m;
    let x = x.add(&p.proj.apply(attn)?.mul_row(&m[2])?)?;
    let hidden = p.mlp_in.apply(&modulated_norm(&x, &m[3], &m[4])?)?.gelu();
    x.add(&p.mlp_out.apply(&hidden)?.mul_row(&m[5])?)
}

/// Per-modality modulated norm and QKV, one softmax attention over the
/// concatenated audio+motion tokens, then per-modality gated projection and
/// gated MLP. `cond` is the activated timestep embedding (1 × H).
pub fn dual_stream_block<'g>(
    x_a: &Var<'g>,
    x_m: &Var<'g>,
    cond: &Var<'g>,
    p: &DualStreamParams<'g>,
    spec: &AttnSpec,
) -> Result<(Var<'g>, Var<'g>)> {
    let (ta, tm) = (x_a.dims2().0, x_m.dims2().0);
    let pa = stream_pre(x_a, cond, &p.audio, &super::layers::positions(ta), spec)?;
    let pm = stream_pre(x_m, cond, &p.motion, &super::layers::positions(tm), spec)?;
    let cat = |a: &[Var<'g>], b: &[Var<'g>]| -> Result<Vec<Var<'g>>> {
        a.iter().zip(b).map(|(a, b)| Var::concat_rows(&[*a, *b])).collect()
    };
    let joint = attention(&cat(&pa.q, &pm.q)?, &cat(&pa.k, &pm.k)?, &cat(&pa.v, &pm.v)?, spec.head_dim)?;
    let out_a = stream_post(x_a, &joint.slice_rows(0, ta)?, &pa, &p.audio)?;
    let out_m = stream_post(x_m, &joint.slice_rows(ta, tm)?, &pm, &p.motion)?;
    Ok((out_a, out_m))
}

/// Single-stream block on concatenated tokens: one linear yields attention
/// inputs and MLP features, both paths run in parallel, a second linear
/// merges them into a gated residual. `positions` gives each token's time index.
pub fn fusion_block<'g>(
    x: &Var<'g>,
    cond: &Var<'g>,
    p: &FusionParams<'g>,
    positions: &[f64],
    spec: &AttnSpec,
) -> Result<Var<'g>> {
    let h = spec.heads * spec.head_dim;
    let m = chunks(&p.modulation.apply(cond)?, 3, h)?;
    let y = p.fc1.apply(&modulated_norm(x, &m[0], &m[1])?)?;
    let mlp_width = y.dims2().1 - 3 * h;
    let q = qk_heads(&y.slice_cols(0, h)?, &p.q_norm, positions, spec)?;
    let k = qk_heads(&y.slice_cols(h, h)?, &p.k_norm, positions, spec)?;
    let v = v_heads(&y.slice_cols(2 * h, h)?, spec)?;
    let a = attention(&q, &k, &v, spec.head_dim)?;
    let act = y.slice_cols(3 * h, mlp_width)?.gelu();
    let z = p.fc2.apply(&Var::concat_cols(&[a, act])?)?;
    x.add(&z.mul_row(&m[2])?)
}
