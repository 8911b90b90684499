//! Audio-driven co-speech gesture generation with a dual-stream diffusion
//! transformer.
//!
//! The crate is organized bottom-up:
//!
//! * [`autodiff`]: f64 tensors, reverse-mode gradients, AdamW, checkpoints.
//! * [`audio`]: WAV input, mel energy, augmentation, temporal quantization,
//!   token embedding and the `QMEL` token file.
//! * [`motion`]: rot6d motion sequences, normalization, a 55-joint kinematic
//!   tree and forward noising.
//! * [`model`]: the dual-stream / fusion transformer denoiser.
//! * [`diffusion`]: noise schedule, losses, training, DDIM sampling and
//!   segment-blended long generation.
//! * [`metrics`]: FGD, BC, Smooth-BC, diversity, jitter and foot sliding.

pub mod audio;
pub mod autodiff;
pub mod diffusion;
pub mod error;
pub mod exec;
pub mod io;
pub mod metrics;
pub mod model;
pub mod motion;
pub mod toy;

pub use error::{Error, Result};
pub use exec::Exec;
