//! The dual-stream diffusion transformer denoiser.

mod blocks;
mod config;
mod denoiser;
mod layers;
mod params;

pub use blocks::{dual_stream_block, fusion_block, DualStreamParams, FusionParams, StreamParams};
pub use config::ModelConfig;
pub use denoiser::Denoiser;
pub use layers::{attention, modulated_norm, positions, qk_heads, timestep_features, v_heads, AttnSpec, Linear};
pub use params::{Bound, ParamStore};

#[cfg(test)]
mod tests;
