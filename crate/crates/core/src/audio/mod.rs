//! Audio front end: WAV input, mel energy, augmentation, temporal
//! quantization into discrete tokens, and token embedding.

mod augment;
mod embed;
mod mel;
mod quantize;
mod wav;

pub use augment::{augment_mel, normalize01, AugmentParams, NormScope, THRESH_FRACTION};
pub use embed::{embed_tokens, motion_frames_for, resample_indices};
pub use mel::{
    hann, hz_to_mel, mel_energy, mel_energy_with, mel_filterbank, mel_to_hz, MelConfig, MelEnergy,
    LOG_FLOOR,
};
pub use quantize::{
    read_tokens, temporal_quantize, write_tokens, Offset, QuantizedAudioTokens, TOKENS_MAGIC,
};
pub use wav::{load_wav, write_wav, AudioSignal};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Everything needed to turn a waveform into tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AudioConfig {
    pub mel: MelConfig,
    pub window: usize,
    pub n_bins: usize,
    pub scope: NormScope,
}

impl Default for AudioConfig {
    fn default() -> Self {
        AudioConfig {
            mel: MelConfig::default(),
            window: 8,
            n_bins: 8,
            scope: NormScope::Global,
        }
    }
}

/// Train mode augments and picks a random offset; infer mode only
/// normalizes and uses the centre offset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Train,
    Infer,
}

/// Mel energy → normalize (and augment in train mode) → quantize, with the
/// offset chosen by `offset` (defaults per mode when `None`).
pub fn tokenize_mel<R: Rng + ?Sized>(
    mel: &MelEnergy,
    cfg: &AudioConfig,
    mode: Mode,
    offset: Option<Offset>,
    rng: &mut R,
) -> Result<QuantizedAudioTokens> {
    let feats = match mode {
        Mode::Train => augment_mel(mel, &AugmentParams::sample(rng), cfg.scope),
        Mode::Infer => normalize01(mel, cfg.scope),
    };
    let offset = offset.unwrap_or(match mode {
        Mode::Train => Offset::Random,
        Mode::Infer => Offset::Center,
    });
    temporal_quantize(&feats.frames, feats.n_mels, cfg.window, cfg.n_bins, offset, rng)
}

pub fn tokenize<R: Rng + ?Sized>(
    signal: &AudioSignal,
    cfg: &AudioConfig,
    mode: Mode,
    offset: Option<Offset>,
    rng: &mut R,
) -> Result<QuantizedAudioTokens> {
    tokenize_mel(&mel_energy(signal, &cfg.mel)?, cfg, mode, offset, rng)
}
