use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::losses::{motion_loss, LossBreakdown, LossWeights};
use super::sample::standard_normal;
use super::NoiseSchedule;
use crate::audio::{tokenize_mel, AudioConfig, MelEnergy, Mode, QuantizedAudioTokens};
use crate::autodiff::{AdamWConfig, Checkpoint, Graph, OptimizerState, Tensor, Var};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::model::{Bound, Denoiser, ModelConfig};
use crate::motion::{compute_stats, q_sample, MotionSequence, Skeleton};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub model: ModelConfig,
    pub audio: AudioConfig,
    pub optimizer: AdamWConfig,
    pub weights: LossWeights,
    pub schedule_steps: usize,
    pub steps: usize,
    pub batch_size: usize,
    /// Training crop length in motion frames.
    pub seq_len: usize,
    pub seed: u64,
    /// Augment audio and draw random quantization offsets.
    pub augment: bool,
    pub exec: Exec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelConfig::default(),
            audio: AudioConfig::default(),
            optimizer: AdamWConfig::default(),
            weights: LossWeights::default(),
            schedule_steps: 1000,
            steps: 2000,
            batch_size: 4,
            seq_len: 32,
            seed: 0,
            augment: true,
            exec: Exec::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.weights.validate()?;
        if self.model.n_bands != self.audio.mel.n_mels || self.model.n_bins != self.audio.n_bins {
            return Err(Error::contract(format!(
                "model expects {}×{} tokens, audio config gives {}×{}",
                self.model.n_bands, self.model.n_bins, self.audio.mel.n_mels, self.audio.n_bins
            )));
        }
        if self.batch_size == 0 || self.seq_len == 0 {
            return Err(Error::contract("batch_size and seq_len must be positive"));
        }
        if self.schedule_steps < 2 {
            return Err(Error::contract("schedule needs at least 2 steps"));
        }
        Ok(())
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: TrainConfig = serde_json::from_str(s).map_err(|e| Error::Parse(format!("train config: {e}")))?;
        c.validate()?;
        Ok(c)
    }
}

/// An aligned clip: mel energy of the audio and its motion.
#[derive(Debug, Clone)]
pub struct TrainingPair {
    pub mel: MelEnergy,
    pub motion: MotionSequence,
}

impl TrainingPair {
    /// Tokens for the whole clip at the motion frame rate.
    pub fn tokens<R: Rng + ?Sized>(&self, cfg: &AudioConfig, mode: Mode, rng: &mut R) -> Result<QuantizedAudioTokens> {
        let q = tokenize_mel(&self.mel, cfg, mode, None, rng)?;
        q.resample(cfg.mel.frame_rate(), self.motion.fps, self.motion.num_frames())
    }
}

/// One fully drawn training example.
#[derive(Debug, Clone)]
pub struct TrainSample {
    pub tokens: QuantizedAudioTokens,
    /// Raw-space target.
    pub gt: MotionSequence,
    /// Normalized noisy input.
    pub x_t: Vec<f64>,
    pub t: usize,
}

impl TrainSample {
    /// Noise the normalized target to step `t` with `noise`.
    pub fn new(
        model: &Denoiser,
        tokens: QuantizedAudioTokens,
        gt: MotionSequence,
        t: usize,
        noise: &[f64],
        schedule: &NoiseSchedule,
    ) -> Result<Self> {
        let x0 = model.stats.normalize(gt.data());
        let x_t = q_sample(&x0, t, noise, schedule)?;
        Ok(TrainSample { tokens, gt, x_t, t })
    }
}

/// Forward, denormalize and score one sample on `g`.
pub fn sample_loss<'g>(
    model: &Denoiser,
    g: &'g Graph,
    p: &Bound<'g, '_>,
    s: &TrainSample,
    skeleton: &Skeleton,
    w: &LossWeights,
) -> Result<(Var<'g>, LossBreakdown)> {
    let d = model.config.motion_dim;
    let frames = s.gt.num_frames();
    let x = g.constant(Tensor::from_matrix(frames, d, s.x_t.clone())?);
    let pred = model.forward(g, p, &s.tokens, &x, s.t)?;
    let mu = g.constant(Tensor::from_matrix(1, d, model.stats.mean.clone())?);
    let sigma = g.constant(Tensor::from_matrix(1, d, model.stats.std.clone())?);
    let raw = pred.mul_row(&sigma)?.add_row(&mu)?;
    motion_loss(&raw, &s.gt, skeleton, w)
}

/// Loss breakdown and parameter gradients for one sample.
pub fn sample_gradients(
    model: &Denoiser,
    s: &TrainSample,
    skeleton: &Skeleton,
    w: &LossWeights,
) -> Result<(LossBreakdown, Vec<Tensor>)> {
    let g = Graph::new();
    let p = model.params.bind(&g, true);
    let (loss, b) = sample_loss(model, &g, &p, s, skeleton, w)?;
    let grads = g.backward(loss)?;
    let out = p
        .vars
        .iter()
        .zip(model.params.tensors())
        .map(|(v, t)| grads.get_or_zeros(*v, t))
        .collect();
    Ok((b, out))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: u64,
    pub loss: LossBreakdown,
}

/// Header plus one `step,total,rot6d,trans,jitter` row per entry.
pub fn loss_csv(log: &[StepLog]) -> String {
    let mut s = String::from("step,total,rot6d,trans,jitter\n");
    for e in log {
        let l = e.loss;
        let _ = writeln!(s, "{},{},{},{},{}", e.step, l.total, l.rot6d, l.trans, l.jitter);
    }
    s
}

/// Single-writer training loop state.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub config: TrainConfig,
    pub model: Denoiser,
    pub opt: OptimizerState,
    pub schedule: NoiseSchedule,
    pub skeleton: Skeleton,
}

impl Trainer {
    /// Statistics come from `data`; parameters from the config seed.
    pub fn new(config: TrainConfig, data: &[TrainingPair], skeleton: Skeleton) -> Result<Self> {
        config.validate()?;
        check_data(data)?;
        let motions: Vec<MotionSequence> = data.iter().map(|p| p.motion.clone()).collect();
        let stats = compute_stats(&motions)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let model = Denoiser::new(config.model.clone(), stats, &mut rng)?;
        let opt = OptimizerState::new(config.optimizer, model.params.tensors());
        let schedule = NoiseSchedule::linear(config.schedule_steps)?;
        Ok(Trainer { config, model, opt, schedule, skeleton })
    }

    pub fn step(&self) -> u64 {
        self.opt.step
    }

    /// Randomness for step `k` depends only on the seed and `k`, so a
    /// resumed run draws the same batches as an uninterrupted one.
    fn step_rng(&self, k: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.config.seed);
        r.set_stream(k + 1);
        r
    }

    /// Draw the batch for the next step. Clips are taken round-robin and
    /// cropped to `seq_len` frames at a random start.
    pub fn draw_batch(&self, data: &[TrainingPair]) -> Result<Vec<TrainSample>> {
        check_data(data)?;
        let k = self.step();
        let mut rng = self.step_rng(k);
        let c = &self.config;
        let mode = if c.augment { Mode::Train } else { Mode::Infer };
        (0..c.batch_size)
            .map(|b| {
                let pair = &data[(k as usize * c.batch_size + b) % data.len()];
                let tokens = pair.tokens(&c.audio, mode, &mut rng)?;
                let n = pair.motion.num_frames();
                let len = c.seq_len.min(n);
                let start = rng.random_range(0..=n - len);
                let t = rng.random_range(0..self.schedule.len());
                let noise = standard_normal(len * c.model.motion_dim, &mut rng);
                TrainSample::new(
                    &self.model,
                    tokens.slice(start, len)?,
                    pair.motion.slice(start, len)?,
                    t,
                    &noise,
                    &self.schedule,
                )
            })
            .collect()
    }

    /// Batch-mean loss and gradient, then one AdamW update.
    pub fn train_step(&mut self, data: &[TrainingPair]) -> Result<StepLog> {
        let batch = self.draw_batch(data)?;
        let c = &self.config;
        let results = c.exec.try_map(batch.len(), |i| {
            sample_gradients(&self.model, &batch[i], &self.skeleton, &c.weights)
        })?;
        let n = results.len() as f64;
        let mut grads: Vec<Tensor> = self.model.params.tensors().iter().map(|t| Tensor::zeros(t.shape().to_vec())).collect();
        let mut loss = LossBreakdown { rot6d: 0.0, trans: 0.0, jitter: 0.0, total: 0.0 };
        for (b, gs) in &results {
            loss.rot6d += b.rot6d / n;
            loss.trans += b.trans / n;
            loss.jitter += b.jitter / n;
            loss.total += b.total / n;
            for (acc, g) in grads.iter_mut().zip(gs) {
                acc.data_mut().iter_mut().zip(g.data()).for_each(|(a, v)| *a += v / n);
            }
        }
        if !loss.total.is_finite() {
            return Err(Error::Numerical(format!("non-finite loss at step {}", self.step())));
        }
        let step = self.step();
        self.opt.step(self.model.params.tensors_mut(), &grads)?;
        Ok(StepLog { step, loss })
    }

    /// Run until `config.steps` total steps, calling `on_step` after each.
    pub fn run(&mut self, data: &[TrainingPair], mut on_step: impl FnMut(&StepLog)) -> Result<Vec<StepLog>> {
        let mut log = Vec::new();
        while (self.step() as usize) < self.config.steps {
            let e = self.train_step(data)?;
            on_step(&e);
            log.push(e);
        }
        Ok(log)
    }

    /// Model checkpoint plus optimizer moments and the training config.
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = self.model.to_checkpoint();
        for (name, (m, v)) in self.model.params.names().iter().zip(self.opt.m.iter().zip(&self.opt.v)) {
            ckpt.tensors.push((format!("opt.m.{name}"), m.clone()));
            ckpt.tensors.push((format!("opt.v.{name}"), v.clone()));
        }
        let mut train = BTreeMap::new();
        train.insert("step", serde_json::json!(self.opt.step));
        train.insert("config", serde_json::to_value(&self.config).expect("config json"));
        ckpt.metadata.insert("train".into(), serde_json::to_value(train).expect("train json"));
        ckpt
    }

    /// Resume from [`Trainer::to_checkpoint`] output.
    pub fn from_checkpoint(ckpt: &Checkpoint, skeleton: Skeleton) -> Result<Self> {
        let model = Denoiser::from_checkpoint(ckpt)?;
        let train = ckpt
            .metadata
            .get("train")
            .ok_or_else(|| Error::Parse("checkpoint has no training state".into()))?;
        let config: TrainConfig = serde_json::from_value(train["config"].clone())
            .map_err(|e| Error::Parse(format!("train config: {e}")))?;
        let step = train["step"]
            .as_u64()
            .ok_or_else(|| Error::Parse("training step missing".into()))?;
        let moment = |kind: &str, name: &str| {
            ckpt.get(&format!("opt.{kind}.{name}"))
                .cloned()
                .ok_or_else(|| Error::Parse(format!("checkpoint lacks opt.{kind}.{name}")))
        };
        let names = model.params.names();
        let m = names.iter().map(|n| moment("m", n)).collect::<Result<Vec<_>>>()?;
        let v = names.iter().map(|n| moment("v", n)).collect::<Result<Vec<_>>>()?;
        let opt = OptimizerState { config: config.optimizer, step, m, v };
        let schedule = NoiseSchedule::linear(config.schedule_steps)?;
        Ok(Trainer { config, model, opt, schedule, skeleton })
    }
}

/// The audio front end a checkpoint was trained with, or the default one
/// sized to the model's token layout.
pub fn audio_config_for(ckpt: &Checkpoint, model: &ModelConfig) -> Result<AudioConfig> {
    if let Some(cfg) = ckpt.metadata.get("train").and_then(|t| t.get("config")) {
        let c: TrainConfig =
            serde_json::from_value(cfg.clone()).map_err(|e| Error::Parse(format!("train config: {e}")))?;
        return Ok(c.audio);
    }
    let mut a = AudioConfig::default();
    a.mel.n_mels = model.n_bands;
    a.n_bins = model.n_bins;
    Ok(a)
}

fn check_data(data: &[TrainingPair]) -> Result<()> {
    if data.is_empty() {
        return Err(Error::contract("training set is empty"));
    }
    Ok(())
}
