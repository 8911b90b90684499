use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::audio::QuantizedAudioTokens;
use crate::autodiff::{finite_diff_check_params, Graph, Stencil, Tensor};
use crate::exec::Exec;
use crate::motion::NormStats;

fn tiny() -> ModelConfig {
    ModelConfig {
        hidden: 8,
        heads: 2,
        dual_blocks: 1,
        fusion_blocks: 1,
        mlp_ratio: 2,
        n_bands: 3,
        n_bins: 4,
        motion_dim: 5,
        ..ModelConfig::default()
    }
}

fn random_stats(dim: usize, rng: &mut ChaCha8Rng) -> NormStats {
    NormStats {
        mean: (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect(),
        std: (0..dim).map(|_| rng.random_range(0.5..2.0)).collect(),
    }
}

fn tokens(frames: usize, cfg: &ModelConfig, rng: &mut ChaCha8Rng) -> QuantizedAudioTokens {
    let t = (0..frames * cfg.n_bands).map(|_| rng.random_range(0..cfg.n_bins as u8)).collect();
    QuantizedAudioTokens::new(t, cfg.n_bands, cfg.n_bins).unwrap()
}

/// Every parameter drawn from N(0, std), gates and output included.
fn randomized(model: &Denoiser, std: f64, rng: &mut ChaCha8Rng) -> Denoiser {
    let mut m = model.clone();
    for t in m.params.tensors_mut() {
        *t = Tensor::randn(t.shape().to_vec(), std, rng);
    }
    m
}

#[test]
fn identity_at_init_returns_the_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let cfg = tiny();
    let stats = random_stats(cfg.motion_dim, &mut rng);
    let model = Denoiser::new(cfg.clone(), stats.clone(), &mut rng).unwrap();
    let tok = tokens(6, &cfg, &mut rng);
    let x: Vec<f64> = (0..30).map(|_| rng.random_range(-3.0..3.0)).collect();
    let out = model.predict(&tok, &x, 17).unwrap();
    assert!(out.iter().all(|&v| v == 0.0));
    let den = model.denormalize(&out);
    for (i, v) in den.iter().enumerate() {
        assert_eq!(*v, stats.mean[i % 5]);
    }
}

#[test]
fn zero_gates_make_blocks_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let cfg = tiny();
    let model = Denoiser::new(cfg.clone(), NormStats::identity(5), &mut rng).unwrap();
    let g = Graph::new();
    let p = model.params.bind(&g, false);
    let xa = g.constant(Tensor::randn(vec![4, 8], 1.0, &mut rng));
    let xm = g.constant(Tensor::randn(vec![4, 8], 1.0, &mut rng));
    let cond = g.constant(Tensor::randn(vec![1, 8], 1.0, &mut rng));
    let spec = model.attn_spec();
    let (a, m) = dual_stream_block(&xa, &xm, &cond, &DualStreamParams::bind(&p, 0), &spec).unwrap();
    assert_eq!(a.value(), xa.value());
    assert_eq!(m.value(), xm.value());
    let x = Var::concat_rows(&[xa, xm]).unwrap();
    let pos: Vec<f64> = positions(4).into_iter().chain(positions(4)).collect();
    let y = fusion_block(&x, &cond, &FusionParams::bind(&p, 0), &pos, &spec).unwrap();
    assert_eq!(y.value(), x.value());
}

use crate::autodiff::Var;

#[test]
fn timestep_embedding_properties() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = Denoiser::new(tiny(), NormStats::identity(5), &mut rng).unwrap();
    let a = model.timestep_embedding(0).unwrap();
    assert_eq!(a, model.timestep_embedding(0).unwrap());
    let b = model.timestep_embedding(999).unwrap();
    let dot: f64 = a.data().iter().zip(b.data()).map(|(x, y)| x * y).sum();
    let na: f64 = a.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb: f64 = b.data().iter().map(|x| x * x).sum::<f64>().sqrt();
    assert!(dot / (na * nb) < 1.0 - 1e-9);
}

#[test]
fn forward_is_finite_on_wide_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let cfg = tiny();
    let model = randomized(&Denoiser::new(cfg.clone(), NormStats::identity(5), &mut rng).unwrap(), 0.5, &mut rng);
    for _ in 0..10 {
        let tok = tokens(7, &cfg, &mut rng);
        let x: Vec<f64> = (0..35).map(|_| rng.random_range(-10.0..10.0)).collect();
        let out = model.predict(&tok, &x, rng.random_range(0..1000)).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
    }
}

#[test]
fn batch_members_do_not_interact() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let cfg = tiny();
    let model = randomized(&Denoiser::new(cfg.clone(), NormStats::identity(5), &mut rng).unwrap(), 0.3, &mut rng);
    let tok = tokens(4, &cfg, &mut rng);
    let other = tokens(4, &cfg, &mut rng);
    let x: Vec<f64> = (0..20).map(|_| rng.random_range(-1.0..1.0)).collect();
    let single = model.predict(&tok, &x, 5).unwrap();
    let batch = model
        .predict_batch(&[(&tok, &x, 5), (&other, &x, 9), (&tok, &x, 5)], Exec::Parallel)
        .unwrap();
    assert_eq!(batch[0], single);
    assert_eq!(batch[2], single);
}

#[test]
fn length_mismatch_is_a_contract_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let cfg = tiny();
    let model = Denoiser::new(cfg.clone(), NormStats::identity(5), &mut rng).unwrap();
    let tok = tokens(3, &cfg, &mut rng);
    assert!(model.predict(&tok, &[0.0; 20], 0).is_err());
}

#[test]
fn checkpoint_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let cfg = tiny();
    let model = randomized(&Denoiser::new(cfg, random_stats(5, &mut rng), &mut rng).unwrap(), 0.1, &mut rng);
    let bytes = model.to_checkpoint().to_bytes().unwrap();
    let back = Denoiser::from_checkpoint(&crate::autodiff::Checkpoint::from_bytes(&bytes).unwrap()).unwrap();
    assert_eq!(back, model);
}

#[test]
fn mean_square_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let cfg = tiny();
    let model = randomized(&Denoiser::new(cfg.clone(), NormStats::identity(5), &mut rng).unwrap(), 0.5, &mut rng);
    let tok = tokens(4, &cfg, &mut rng);
    let x = Tensor::randn(vec![4, 5], 1.0, &mut rng);
    let check = finite_diff_check_params(
        |g, vars| {
            let bound = model.params.bind_vars(vars.to_vec())?;
            let xv = g.constant(x.clone());
            Ok(model.forward(g, &bound, &tok, &xv, 42)?.mean_square())
        },
        model.params.tensors(),
        Stencil::Central4(1e-3),
        Exec::Parallel,
    )
    .unwrap();
    assert!(check.max_rel_err() < 1e-4, "{check:?}");
}

