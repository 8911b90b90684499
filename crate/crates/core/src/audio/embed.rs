use super::QuantizedAudioTokens;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Motion frames covered by `n_audio` frames at `audio_rate` (frames/s).
pub fn motion_frames_for(n_audio: usize, audio_rate: f64, fps: f64) -> usize {
    (n_audio as f64 * fps / audio_rate + 1e-9).floor() as usize
}

/// For motion frame `k`, the audio frame `round(k · audio_rate / fps)`,
/// clamped to the last available frame.
pub fn resample_indices(n_audio: usize, audio_rate: f64, fps: f64, n_motion: usize) -> Vec<usize> {
    (0..n_motion)
        .map(|k| ((k as f64 * audio_rate / fps).round() as usize).min(n_audio.saturating_sub(1)))
        .collect()
}

impl QuantizedAudioTokens {
    /// Nearest-frame resampling of token rows onto `n_motion` motion frames.
    pub fn resample(&self, audio_rate: f64, fps: f64, n_motion: usize) -> Result<QuantizedAudioTokens> {
        if n_motion == 0 {
            return Err(Error::contract("cannot resample to zero frames"));
        }
        let idx = resample_indices(self.num_frames, audio_rate, fps, n_motion);
        let tokens = idx.iter().flat_map(|&i| self.frame(i).iter().copied()).collect();
        Ok(QuantizedAudioTokens {
            tokens,
            num_frames: n_motion,
            ..self.clone()
        })
    }

    /// Row `band · n_bins + token` of the embedding table for every entry.
    pub fn embedding_rows(&self) -> Vec<usize> {
        self.tokens
            .iter()
            .enumerate()
            .map(|(i, &q)| (i % self.n_bands) * self.n_bins + q as usize)
            .collect()
    }

    /// Frames `start..start + len`.
    pub fn slice(&self, start: usize, len: usize) -> Result<QuantizedAudioTokens> {
        if len == 0 || start + len > self.num_frames {
            return Err(Error::contract(format!(
                "token slice {start}..{} of {} frames",
                start + len,
                self.num_frames
            )));
        }
        Ok(QuantizedAudioTokens {
            tokens: self.tokens[start * self.n_bands..(start + len) * self.n_bands].to_vec(),
            num_frames: len,
            ..self.clone()
        })
    }
}

/// Per frame, the sum over bands of table rows `band · n_bins + token`.
pub fn embed_tokens(tokens: &QuantizedAudioTokens, table: &Tensor) -> Result<Tensor> {
    let (rows, width) = table.dims2();
    if rows != tokens.n_bands * tokens.n_bins {
        return Err(Error::contract(format!(
            "embedding table has {rows} rows, tokens need {}",
            tokens.n_bands * tokens.n_bins
        )));
    }
    let idx = tokens.embedding_rows();
    let mut out = vec![0.0; tokens.num_frames * width];
    for t in 0..tokens.num_frames {
        let dst = &mut out[t * width..(t + 1) * width];
        for &r in &idx[t * tokens.n_bands..(t + 1) * tokens.n_bands] {
            for (o, v) in dst.iter_mut().zip(table.row(r)) {
                *o += v;
            }
        }
    }
    Tensor::from_matrix(tokens.num_frames, width, out)
}
