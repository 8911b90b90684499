use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::NoiseSchedule;
use crate::audio::{motion_frames_for, tokenize_mel, AudioConfig, MelEnergy, Mode, Offset, QuantizedAudioTokens};
use crate::error::{Error, Result};
use crate::model::Denoiser;
use crate::motion::{q_sample, MotionSequence};

/// Anything that maps a noisy sample at step `t` to a clean estimate.
pub trait X0Model {
    fn predict_x0(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>>;
}

impl<F: Fn(&[f64], usize) -> Result<Vec<f64>>> X0Model for F {
    fn predict_x0(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        self(x_t, t)
    }
}

/// A denoiser bound to one clip's audio tokens.
pub struct Conditioned<'a> {
    pub model: &'a Denoiser,
    pub tokens: &'a QuantizedAudioTokens,
}

impl X0Model for Conditioned<'_> {
    fn predict_x0(&self, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        self.model.predict(self.tokens, x_t, t)
    }
}

/// A known clean prefix that is re-noised to the current step and written
/// over the sample before every model call.
pub struct Inpaint<'a> {
    pub values: &'a [f64],
    pub noise: &'a [f64],
}

pub fn standard_normal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// Deterministic (η = 0) DDIM for a clean-sample predictor. At each step
/// `ε̂ = (x_t − √ᾱ_t x̂₀) / √(1 − ᾱ_t)` and `x_{t'} = √ᾱ_{t'} x̂₀ + √(1 − ᾱ_{t'}) ε̂`;
/// the last step returns `x̂₀`.
pub fn ddim_loop<M: X0Model + ?Sized>(
    model: &M,
    x_init: Vec<f64>,
    schedule: &NoiseSchedule,
    steps: usize,
    inpaint: Option<&Inpaint>,
) -> Result<Vec<f64>> {
    let ts = schedule.ddim_timesteps(steps)?;
    if let Some(ip) = inpaint {
        if ip.values.len() != ip.noise.len() || ip.values.len() > x_init.len() {
            return Err(Error::contract("inpainting prefix does not fit the sample"));
        }
    }
    let mut x = x_init;
    for (i, &t) in ts.iter().enumerate() {
        if let Some(ip) = inpaint {
            let known = q_sample(ip.values, t, ip.noise, schedule)?;
            x[..known.len()].copy_from_slice(&known);
        }
        let x0 = model.predict_x0(&x, t)?;
        if x0.len() != x.len() {
            return Err(Error::contract(format!("model returned {} values for {}", x0.len(), x.len())));
        }
        let Some(&next) = ts.get(i + 1) else {
            return Ok(x0);
        };
        let (ab, ab_next) = (schedule.alpha_bar(t)?, schedule.alpha_bar(next)?);
        let (sa, sn) = (ab.sqrt(), (1.0 - ab).sqrt());
        let (sa_next, sn_next) = (ab_next.sqrt(), (1.0 - ab_next).sqrt());
        for (xi, &c) in x.iter_mut().zip(&x0) {
            let eps = if sn > 0.0 { (*xi - sa * c) / sn } else { 0.0 };
            *xi = sa_next * c + sn_next * eps;
        }
    }
    unreachable!("ddim_timesteps returns at least one step")
}

/// Sample one clip: tokens must already be at motion frame rate.
pub fn ddim_sample<R: Rng + ?Sized>(
    model: &Denoiser,
    tokens: &QuantizedAudioTokens,
    schedule: &NoiseSchedule,
    steps: usize,
    fps: f64,
    rng: &mut R,
) -> Result<MotionSequence> {
    let frames = tokens.num_frames;
    let x_init = standard_normal(frames * model.config.motion_dim, rng);
    let x0 = ddim_loop(&Conditioned { model, tokens }, x_init, schedule, steps, None)?;
    MotionSequence::new(model.denormalize(&x0), fps)
}

/// Segment length and overlap for long clips.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub length: usize,
    pub overlap: usize,
}

impl SegmentPlan {
    /// Overlap of a quarter segment.
    pub fn new(length: usize) -> Result<Self> {
        let p = SegmentPlan {
            length,
            overlap: length / 4,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.overlap == 0 || self.overlap >= self.length {
            return Err(Error::contract(format!(
                "overlap {} must be in 1..{}",
                self.overlap, self.length
            )));
        }
        Ok(())
    }

    /// `(start, len)` per segment. Starts advance by `length − overlap`; the
    /// last segment is pulled back to end exactly at `total`.
    pub fn segments(&self, total: usize) -> Vec<(usize, usize)> {
        if total <= self.length {
            return vec![(0, total)];
        }
        let stride = self.length - self.overlap;
        let mut out = vec![(0, self.length)];
        loop {
            let prev_end = out.last().map(|&(s, l)| s + l).unwrap();
            if prev_end >= total {
                return out;
            }
            let start = (out.last().unwrap().0 + stride).min(total - self.length);
            out.push((start, self.length));
        }
    }

    /// Weight of the incoming segment across an `n`-frame overlap, from 0 to 1.
    /// The outgoing segment gets `1 − w`.
    pub fn blend_weights(n: usize) -> Vec<f64> {
        if n == 1 {
            return vec![0.5];
        }
        (0..n).map(|i| i as f64 / (n - 1) as f64).collect()
    }
}

/// Segment-wise sampling with inpainted context and a linear crossfade.
/// Clips no longer than one segment reduce to [`ddim_sample`].
pub fn generate_long<R: Rng + ?Sized>(
    model: &Denoiser,
    tokens: &QuantizedAudioTokens,
    schedule: &NoiseSchedule,
    steps: usize,
    plan: &SegmentPlan,
    fps: f64,
    rng: &mut R,
) -> Result<MotionSequence> {
    plan.validate()?;
    let total = tokens.num_frames;
    if total <= plan.length {
        return ddim_sample(model, tokens, schedule, steps, fps, rng);
    }
    let d = model.config.motion_dim;
    let mut out = vec![0.0; total * d];
    let mut prev_end = 0;
    for (k, &(start, len)) in plan.segments(total).iter().enumerate() {
        let seg_tokens = tokens.slice(start, len)?;
        let cond = Conditioned { model, tokens: &seg_tokens };
        let x_init = standard_normal(len * d, rng);
        let seg = if k == 0 {
            ddim_loop(&cond, x_init, schedule, steps, None)?
        } else {
            let ctx = out[start * d..prev_end * d].to_vec();
            let noise = standard_normal(ctx.len(), rng);
            ddim_loop(&cond, x_init, schedule, steps, Some(&Inpaint { values: &ctx, noise: &noise }))?
        };
        let overlap = prev_end.saturating_sub(start);
        let w = SegmentPlan::blend_weights(overlap.max(1));
        for i in 0..overlap {
            let (dst, src) = (&mut out[(start + i) * d..(start + i + 1) * d], &seg[i * d..(i + 1) * d]);
            for (o, s) in dst.iter_mut().zip(src) {
                *o = (1.0 - w[i]) * *o + w[i] * s;
            }
        }
        out[(start + overlap) * d..(start + len) * d].copy_from_slice(&seg[overlap * d..]);
        prev_end = start + len;
    }
    MotionSequence::new(model.denormalize(&out), fps)
}

/// Settings for sampling a whole clip from audio.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOptions {
    pub steps: usize,
    pub offset: Offset,
    pub plan: SegmentPlan,
    pub fps: f64,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            steps: 50,
            offset: Offset::Random,
            plan: SegmentPlan { length: 320, overlap: 80 },
            fps: 30.0,
        }
    }
}

/// Quantize `mel` (no augmentation), resample to the motion rate and
/// generate, segment-blended when the clip is longer than one segment.
/// The offset draw and the sampler noise both come from `rng`.
pub fn sample_from_mel<R: Rng + ?Sized>(
    model: &Denoiser,
    mel: &MelEnergy,
    audio: &AudioConfig,
    schedule: &NoiseSchedule,
    opts: &SampleOptions,
    rng: &mut R,
) -> Result<MotionSequence> {
    let q = tokenize_mel(mel, audio, Mode::Infer, Some(opts.offset), rng)?;
    let rate = audio.mel.frame_rate();
    let frames = motion_frames_for(mel.num_frames, rate, opts.fps);
    let tokens = q.resample(rate, opts.fps, frames)?;
    generate_long(model, &tokens, schedule, opts.steps, &opts.plan, opts.fps, rng)
}
