use std::collections::BTreeMap;

use rand::Rng;

use super::blocks::{dual_stream_block, fusion_block, DualStreamParams, FusionParams};
use super::layers::{positions, timestep_features, AttnSpec, Linear};
use super::params::Bound;
use super::{ModelConfig, ParamStore};
use crate::audio::QuantizedAudioTokens;
use crate::autodiff::{Checkpoint, Graph, Tensor, Var};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::motion::NormStats;

/// Dual-stream denoiser predicting clean normalized motion, plus the
/// statistics of its denormalization layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Denoiser {
    pub config: ModelConfig,
    pub params: ParamStore,
    pub stats: NormStats,
}

impl Denoiser {
    pub fn new<R: Rng + ?Sized>(config: ModelConfig, stats: NormStats, rng: &mut R) -> Result<Self> {
        let params = ParamStore::init(&config, rng)?;
        Self::from_parts(config, params, stats)
    }

    pub fn from_parts(config: ModelConfig, params: ParamStore, stats: NormStats) -> Result<Self> {
        config.validate()?;
        params.check_layout(&config)?;
        stats.validate()?;
        if stats.dim() != config.motion_dim {
            return Err(Error::contract(format!(
                "statistics have {} dims, model predicts {}",
                stats.dim(),
                config.motion_dim
            )));
        }
        Ok(Denoiser { config, params, stats })
    }

    pub fn attn_spec(&self) -> AttnSpec {
        AttnSpec {
            heads: self.config.heads,
            head_dim: self.config.head_dim(),
            rope_base: self.config.rope_base,
        }
    }

    fn check_tokens(&self, tokens: &QuantizedAudioTokens, frames: usize) -> Result<()> {
        if tokens.num_frames != frames {
            return Err(Error::contract(format!(
                "audio has {} frames, motion has {frames}",
                tokens.num_frames
            )));
        }
        if tokens.n_bands != self.config.n_bands || tokens.n_bins != self.config.n_bins {
            return Err(Error::contract(format!(
                "tokens are {} bands × {} bins, model expects {} × {}",
                tokens.n_bands, tokens.n_bins, self.config.n_bands, self.config.n_bins
            )));
        }
        Ok(())
    }

    /// Sinusoidal features through a two-layer SiLU MLP (1 × H).
    pub fn timestep_embedding_var<'g>(&self, g: &'g Graph, p: &Bound<'g, '_>, t: usize) -> Result<Var<'g>> {
        let h = self.config.hidden;
        let f = g.constant(Tensor::from_matrix(1, h, timestep_features(t, h))?);
        let hidden = Linear::bind(p, "time.fc1").apply(&f)?.silu();
        Linear::bind(p, "time.fc2").apply(&hidden)
    }

    pub fn timestep_embedding(&self, t: usize) -> Result<Tensor> {
        let g = Graph::new();
        let p = self.params.bind(&g, false);
        Ok(self.timestep_embedding_var(&g, &p, t)?.value())
    }

    /// Input projections → dual-stream blocks → fusion blocks on the
    /// concatenated tokens → final modulated norm and projection of the
    /// motion tokens. `x_t` is `T × motion_dim`, normalized.
    pub fn forward<'g>(
        &self,
        g: &'g Graph,
        p: &Bound<'g, '_>,
        tokens: &QuantizedAudioTokens,
        x_t: &Var<'g>,
        t: usize,
    ) -> Result<Var<'g>> {
        let (frames, width) = x_t.dims2();
        if width != self.config.motion_dim {
            return Err(Error::shape("denoiser input", &[frames, width], &[frames, self.config.motion_dim]));
        }
        self.check_tokens(tokens, frames)?;
        let spec = self.attn_spec();
        let h = self.config.hidden;
        let cond = self.timestep_embedding_var(g, p, t)?.silu();

        let f_a = p.get("audio_embed").embedding_sum(&tokens.embedding_rows(), tokens.n_bands)?;
        let mut x_a = Linear::bind(p, "audio_in").apply(&f_a)?;
        let mut x_m = Linear::bind(p, "motion_in").apply(x_t)?;
        for i in 0..self.config.dual_blocks {
            (x_a, x_m) = dual_stream_block(&x_a, &x_m, &cond, &DualStreamParams::bind(p, i), &spec)?;
        }
        let ta = tokens.num_frames;
        let pos: Vec<f64> = positions(ta).into_iter().chain(positions(frames)).collect();
        let mut x = Var::concat_rows(&[x_a, x_m])?;
        for j in 0..self.config.fusion_blocks {
            x = fusion_block(&x, &cond, &FusionParams::bind(p, j), &pos, &spec)?;
        }
        let m = Linear::bind(p, "final.mod").apply(&cond)?;
        let (alpha, beta) = (m.slice_cols(0, h)?, m.slice_cols(h, h)?);
        let xm = super::layers::modulated_norm(&x.slice_rows(ta, frames)?, &alpha, &beta)?;
        Linear::bind(p, "final.out").apply(&xm)
    }

    /// Normalized clean-motion prediction for one sample.
    pub fn predict(&self, tokens: &QuantizedAudioTokens, x_t: &[f64], t: usize) -> Result<Vec<f64>> {
        let frames = x_t.len() / self.config.motion_dim.max(1);
        let g = Graph::new();
        let p = self.params.bind(&g, false);
        let x = g.constant(Tensor::from_matrix(frames, self.config.motion_dim, x_t.to_vec())?);
        Ok(self.forward(&g, &p, tokens, &x, t)?.value().into_vec())
    }

    /// [`Denoiser::predict`] over independent samples.
    pub fn predict_batch(
        &self,
        batch: &[(&QuantizedAudioTokens, &[f64], usize)],
        exec: Exec,
    ) -> Result<Vec<Vec<f64>>> {
        exec.try_map(batch.len(), |i| {
            let (tok, x, t) = batch[i];
            self.predict(tok, x, t)
        })
    }

    pub fn denormalize(&self, x: &[f64]) -> Vec<f64> {
        self.stats.denormalize(x)
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut metadata = BTreeMap::new();
        metadata.insert("config".into(), serde_json::to_value(&self.config).expect("config json"));
        metadata.insert("stats".into(), serde_json::to_value(&self.stats).expect("stats json"));
        Checkpoint {
            tensors: self.params.clone().into_entries(),
            metadata,
        }
    }

    /// Rebuild from a checkpoint; tensors whose names are not model
    /// parameters (e.g. optimizer moments) are ignored.
    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let field = |k: &str| {
            ckpt.metadata
                .get(k)
                .ok_or_else(|| Error::Parse(format!("checkpoint metadata lacks {k}")))
        };
        let config: ModelConfig =
            serde_json::from_value(field("config")?.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let stats: NormStats =
            serde_json::from_value(field("stats")?.clone()).map_err(|e| Error::Parse(e.to_string()))?;
        let template = ParamStore::init(&ModelConfig { init_std: 0.0, ..config.clone() }, &mut rand::rng())?;
        let entries = template
            .names()
            .iter()
            .map(|n| {
                ckpt.get(n)
                    .cloned()
                    .map(|t| (n.clone(), t))
                    .ok_or_else(|| Error::Parse(format!("checkpoint lacks parameter {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(config, ParamStore::new(entries)?, stats)
    }
}
