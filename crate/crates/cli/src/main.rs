//! `gesture-dit` command-line tool.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use gesture_dit::audio::{
    load_wav, mel_energy, tokenize, write_tokens, write_wav, AudioConfig, Mode, NormScope, Offset,
};
use gesture_dit::autodiff::{read_checkpoint, write_checkpoint};
use gesture_dit::diffusion::{
    audio_config_for, loss_csv, sample_from_mel, NoiseSchedule, SampleOptions, SegmentPlan, StepLog,
    TrainConfig, Trainer, TrainingPair, JITTER_SWEEP,
};
use gesture_dit::io::atomic_write_str;
use gesture_dit::metrics::{evaluate, noise_diagnostic, MetricConfig};
use gesture_dit::model::Denoiser;
use gesture_dit::motion::{read_motion, write_motion, Skeleton};
use gesture_dit::toy::{toy_dataset, toy_pair, ToyConfig};
use gesture_dit::{Error, Result};

#[derive(Parser)]
#[command(name = "gesture-dit", version, about = "Audio-driven gesture diffusion toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Turn a WAV file into a QMEL token file.
    Quantize(QuantizeArgs),
    /// Train a denoiser on a directory of aligned WAV/MOTN pairs.
    Train(TrainArgs),
    /// Sample motion for a WAV file, one MOTN file per seed.
    Sample(SampleArgs),
    /// Score predicted motion against ground truth and audio.
    Evaluate(EvaluateArgs),
    /// Score Gaussian-noise motion with BC and Smooth-BC.
    NoiseDiagnostic(NoiseArgs),
    /// Write synthetic click-train audio with beat-locked motion.
    MakeToyData(ToyArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Train,
    Infer,
}

#[derive(Clone, Copy, ValueEnum)]
enum ScopeArg {
    Global,
    PerBand,
}

#[derive(Clone, Copy, ValueEnum)]
enum OffsetArg {
    Random,
    Center,
}

#[derive(Args)]
struct QuantizeArgs {
    #[arg(long)]
    wav: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 8)]
    window: usize,
    #[arg(long, default_value_t = 8)]
    bins: usize,
    #[arg(long, default_value_t = 40)]
    mels: usize,
    #[arg(long, value_enum, default_value = "infer")]
    mode: ModeArg,
    #[arg(long, value_enum, default_value = "global")]
    scope: ScopeArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the tokens as JSON next to the output.
    #[arg(long)]
    json: bool,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of `<name>.wav` + `<name>.motn` pairs.
    #[arg(long)]
    data: PathBuf,
    /// Output directory for the checkpoint and loss log.
    #[arg(long)]
    out: PathBuf,
    /// Training config JSON; defaults apply to missing fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Continue from a training checkpoint.
    #[arg(long)]
    resume: Option<PathBuf>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda_jitter: Option<f64>,
    /// Train once per jitter weight in {0, 1e-11, 1e-10, 1e-9, 1e-8}.
    #[arg(long)]
    jitter_sweep: bool,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    wav: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    seeds: Vec<u64>,
    #[arg(long, default_value_t = 50)]
    steps: usize,
    #[arg(long, value_enum, default_value = "random")]
    offset: OffsetArg,
    #[arg(long, default_value_t = 320)]
    segment: usize,
    /// Defaults to a quarter segment.
    #[arg(long)]
    overlap: Option<usize>,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long)]
    wav: PathBuf,
    /// Further samples for the same audio, for inter-diversity.
    #[arg(long, num_args = 1..)]
    samples: Vec<PathBuf>,
    /// Metric config JSON.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long)]
    skeleton: Option<PathBuf>,
}

#[derive(Args)]
struct NoiseArgs {
    #[arg(long)]
    wav: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 30.0)]
    fps: f64,
    /// Also write the JSON report here.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ToyArgs {
    #[arg(long)]
    out: PathBuf,
    /// Comma-separated beats per second, one pair each.
    #[arg(long, value_delimiter = ',', default_value = "1.5,2,2.5,3")]
    tempos: Vec<f64>,
    /// Clip length in motion frames.
    #[arg(long, default_value_t = 32)]
    frames: usize,
    #[arg(long, default_value_t = 0.3)]
    amplitude: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write `long/long.wav` and `long/long.motn` of this many frames.
    #[arg(long)]
    long: Option<usize>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Quantize(a) => quantize(a),
        Command::Train(a) => train(a),
        Command::Sample(a) => sample(a),
        Command::Evaluate(a) => evaluate_cmd(a),
        Command::NoiseDiagnostic(a) => noise(a),
        Command::MakeToyData(a) => make_toy(a),
    }
}

fn require_file(p: &Path) -> Result<()> {
    if p.is_file() {
        Ok(())
    } else {
        Err(Error::Io {
            path: p.to_path_buf(),
            source: std::io::Error::new(std::io::ErrorKind::NotFound, "no such file"),
        })
    }
}

fn ensure_dir(p: &Path) -> Result<()> {
    std::fs::create_dir_all(p).map_err(|source| Error::Io { path: p.to_path_buf(), source })
}

fn read_json<T: serde::de::DeserializeOwned>(p: &Path) -> Result<T> {
    let s = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
    serde_json::from_str(&s).map_err(|e| Error::File { path: p.to_path_buf(), message: e.to_string() })
}

fn load_skeleton(p: &Option<PathBuf>) -> Result<Skeleton> {
    match p {
        Some(p) => Skeleton::load(p),
        None => Ok(Skeleton::standard()),
    }
}

fn quantize(a: QuantizeArgs) -> Result<()> {
    require_file(&a.wav)?;
    let signal = load_wav(&a.wav)?;
    let mut cfg = AudioConfig { window: a.window, n_bins: a.bins, ..AudioConfig::default() };
    cfg.mel.n_mels = a.mels;
    cfg.scope = match a.scope {
        ScopeArg::Global => NormScope::Global,
        ScopeArg::PerBand => NormScope::PerBand,
    };
    let mode = match a.mode {
        ModeArg::Train => Mode::Train,
        ModeArg::Infer => Mode::Infer,
    };
    let q = tokenize(&signal, &cfg, mode, None, &mut ChaCha8Rng::seed_from_u64(a.seed))?;
    write_tokens(&a.out, &q)?;
    if a.json {
        atomic_write_str(&a.out.with_extension("json"), &q.to_json())?;
    }
    println!("{} frames x {} bands, offset {}", q.num_frames, q.n_bands, q.offset);
    Ok(())
}

/// `<stem>.wav` + `<stem>.motn` pairs, sorted by stem.
fn load_pairs(dir: &Path, audio: &AudioConfig) -> Result<Vec<TrainingPair>> {
    let entries = std::fs::read_dir(dir).map_err(|source| Error::Io { path: dir.to_path_buf(), source })?;
    let mut stems: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "wav") && p.with_extension("motn").is_file())
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(Error::File { path: dir.to_path_buf(), message: "no wav/motn pairs found".into() });
    }
    stems
        .iter()
        .map(|wav| {
            let mel = mel_energy(&load_wav(wav)?, &audio.mel)?;
            let motion = read_motion(&wav.with_extension("motn"))?;
            Ok(TrainingPair { mel, motion })
        })
        .collect()
}

fn train(a: TrainArgs) -> Result<()> {
    if let Some(c) = &a.config {
        require_file(c)?;
    }
    if let Some(r) = &a.resume {
        require_file(r)?;
    }
    ensure_dir(&a.out)?;
    let skeleton = load_skeleton(&a.skeleton)?;
    let mut config: TrainConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = a.steps {
        config.steps = s;
    }
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(lr) = a.lr {
        config.optimizer.lr = lr;
    }
    if let Some(l) = a.lambda_jitter {
        config.weights.jitter = l;
    }
    config.validate()?;
    let data = load_pairs(&a.data, &config.audio)?;

    if a.jitter_sweep {
        for lambda in JITTER_SWEEP {
            let mut c = config.clone();
            c.weights.jitter = lambda;
            let dir = a.out.join(format!("jitter_{lambda:e}"));
            ensure_dir(&dir)?;
            let mut tr = Trainer::new(c, &data, skeleton.clone())?;
            let log = run_training(&mut tr, &data, &dir, Vec::new())?;
            println!("lambda_jitter {lambda:e}: final loss {:.6}", log.last().map_or(f64::NAN, |e| e.loss.total));
        }
        return Ok(());
    }

    let (mut tr, prior) = match &a.resume {
        Some(r) => {
            let mut tr = Trainer::from_checkpoint(&read_checkpoint(r)?, skeleton)?;
            tr.config.steps = config.steps;
            let prior_csv = r.with_file_name("loss.csv");
            let prior = if prior_csv.is_file() { read_log(&prior_csv)? } else { Vec::new() };
            (tr, prior)
        }
        None => (Trainer::new(config, &data, skeleton)?, Vec::new()),
    };
    let log = run_training(&mut tr, &data, &a.out, prior)?;
    if let Some(e) = log.last() {
        println!("step {} loss {:.6}", e.step, e.loss.total);
    }
    Ok(())
}

fn read_log(p: &Path) -> Result<Vec<StepLog>> {
    let s = std::fs::read_to_string(p).map_err(|source| Error::Io { path: p.to_path_buf(), source })?;
    let bad = |m: &str| Error::File { path: p.to_path_buf(), message: m.to_string() };
    s.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            if f.len() != 5 {
                return Err(bad("loss log rows need 5 fields"));
            }
            let num = |i: usize| f[i].parse::<f64>().map_err(|_| bad("bad number in loss log"));
            Ok(StepLog {
                step: f[0].parse().map_err(|_| bad("bad step in loss log"))?,
                loss: gesture_dit::diffusion::LossBreakdown {
                    total: num(1)?,
                    rot6d: num(2)?,
                    trans: num(3)?,
                    jitter: num(4)?,
                },
            })
        })
        .collect()
}

fn run_training(tr: &mut Trainer, data: &[TrainingPair], dir: &Path, mut log: Vec<StepLog>) -> Result<Vec<StepLog>> {
    log.retain(|e| e.step < tr.step());
    let total = tr.config.steps;
    let every = (total / 20).max(1) as u64;
    let new = tr.run(data, |e| {
        if e.step % every == 0 {
            eprintln!("step {:>6}/{total} loss {:.6}", e.step, e.loss.total);
        }
    })?;
    log.extend(new);
    write_checkpoint(&dir.join("checkpoint.ckpt"), &tr.to_checkpoint())?;
    atomic_write_str(&dir.join("loss.csv"), &loss_csv(&log))?;
    Ok(log)
}

fn sample(a: SampleArgs) -> Result<()> {
    require_file(&a.checkpoint)?;
    require_file(&a.wav)?;
    ensure_dir(&a.out_dir)?;
    let ckpt = read_checkpoint(&a.checkpoint)?;
    let model = Denoiser::from_checkpoint(&ckpt)?;
    let audio_cfg = audio_config_for(&ckpt, &model.config)?;
    let schedule_steps = ckpt
        .metadata
        .get("train")
        .and_then(|t| t["config"]["schedule_steps"].as_u64())
        .unwrap_or(1000) as usize;
    let schedule = NoiseSchedule::linear(schedule_steps)?;
    let plan = SegmentPlan {
        length: a.segment,
        overlap: a.overlap.unwrap_or(a.segment / 4),
    };
    plan.validate()?;
    let opts = SampleOptions {
        steps: a.steps,
        offset: match a.offset {
            OffsetArg::Random => Offset::Random,
            OffsetArg::Center => Offset::Center,
        },
        plan,
        fps: a.fps,
    };
    let mel = mel_energy(&load_wav(&a.wav)?, &audio_cfg.mel)?;
    for &seed in &a.seeds {
        let m = sample_from_mel(&model, &mel, &audio_cfg, &schedule, &opts, &mut ChaCha8Rng::seed_from_u64(seed))?;
        let path = a.out_dir.join(format!("sample_seed{seed}.motn"));
        write_motion(&path, &m)?;
        println!("{}: {} frames", path.display(), m.num_frames());
    }
    Ok(())
}

fn evaluate_cmd(a: EvaluateArgs) -> Result<()> {
    for p in [&a.pred, &a.gt, &a.wav].into_iter().chain(&a.samples).chain(&a.config) {
        require_file(p)?;
    }
    ensure_dir(&a.out_dir)?;
    let cfg: MetricConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => MetricConfig::default(),
    };
    let skeleton = load_skeleton(&a.skeleton)?;
    let pred = read_motion(&a.pred)?;
    let gt = read_motion(&a.gt)?;
    let extra = a.samples.iter().map(|p| read_motion(p)).collect::<Result<Vec<_>>>()?;
    let ev = evaluate(&pred, &gt, &load_wav(&a.wav)?, &extra, &skeleton, &cfg)?;
    let table = ev.report.to_table();
    atomic_write_str(&a.out_dir.join("report.json"), &ev.report.to_json())?;
    atomic_write_str(&a.out_dir.join("report.txt"), &table)?;
    atomic_write_str(&a.out_dir.join("beats_audio.csv"), &ev.audio_beats.to_csv())?;
    atomic_write_str(&a.out_dir.join("beats_bc.csv"), &ev.bc_beats.to_csv())?;
    atomic_write_str(&a.out_dir.join("beats_smooth.csv"), &ev.smooth_beats.to_csv())?;
    print!("{table}");
    Ok(())
}

fn noise(a: NoiseArgs) -> Result<()> {
    require_file(&a.wav)?;
    let cfg: MetricConfig = match &a.config {
        Some(p) => read_json(p)?,
        None => MetricConfig::default(),
    };
    let d = noise_diagnostic(&load_wav(&a.wav)?, a.seed, a.fps, &Skeleton::standard(), &cfg)?;
    let json = d.to_json();
    if let Some(out) = &a.out {
        atomic_write_str(out, &json)?;
    }
    println!("{json}");
    if !d.applicable {
        println!("no audio beats: separation check not applicable");
        return Ok(());
    }
    if !d.passed {
        return Err(Error::Contract(format!(
            "noise motion separation failed: BC {:.4}, Smooth-BC {:.4}",
            d.bc, d.smooth_bc
        )));
    }
    println!("separation holds: BC {:.4} vs Smooth-BC {:.4}", d.bc, d.smooth_bc);
    Ok(())
}

fn make_toy(a: ToyArgs) -> Result<()> {
    ensure_dir(&a.out)?;
    let cfg = ToyConfig {
        tempos: a.tempos.clone(),
        frames: a.frames,
        amplitude: a.amplitude,
        seed: a.seed,
        ..ToyConfig::default()
    };
    for (i, p) in toy_dataset(&cfg)?.iter().enumerate() {
        let stem = a.out.join(format!("pair{i}"));
        write_wav(&stem.with_extension("wav"), &p.audio)?;
        write_motion(&stem.with_extension("motn"), &p.motion)?;
        println!("{}: {} Hz, {} frames", stem.display(), p.tempo, p.motion.num_frames());
    }
    if let Some(frames) = a.long {
        let tempo = cfg.tempos.first().copied().unwrap_or(2.0);
        let p = toy_pair(&cfg, tempo, frames)?;
        let long_dir = a.out.join("long");
        ensure_dir(&long_dir)?;
        write_wav(&long_dir.join("long.wav"), &p.audio)?;
        write_motion(&long_dir.join("long.motn"), &p.motion)?;
    }
    Ok(())
}
