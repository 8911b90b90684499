use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::atomic_write;

pub const TOKENS_MAGIC: &[u8; 4] = b"QMEL";

/// How the downsampling offset `s` is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Offset {
    /// Uniform in `[0, w − 1]` (training).
    Random,
    /// `⌊w / 2⌋` (inference).
    Center,
    Fixed(usize),
}

impl Offset {
    pub fn resolve<R: Rng + ?Sized>(self, window: usize, rng: &mut R) -> usize {
        match self {
            Offset::Random => rng.random_range(0..window),
            Offset::Center => window / 2,
            Offset::Fixed(s) => s,
        }
    }
}

/// `T × D` discrete tokens in `[0, n_bins)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedAudioTokens {
    pub tokens: Vec<u8>,
    pub num_frames: usize,
    pub n_bands: usize,
    pub n_bins: usize,
    pub window: usize,
    pub offset: usize,
}

impl QuantizedAudioTokens {
    pub fn new(tokens: Vec<u8>, n_bands: usize, n_bins: usize) -> Result<Self> {
        if n_bands == 0 || tokens.is_empty() || tokens.len() % n_bands != 0 {
            return Err(Error::contract(format!(
                "{} tokens do not split into {n_bands} bands",
                tokens.len()
            )));
        }
        if !(2..=256).contains(&n_bins) {
            return Err(Error::contract(format!("n_bins must be in 2..=256, got {n_bins}")));
        }
        if let Some(&bad) = tokens.iter().find(|&&t| t as usize >= n_bins) {
            return Err(Error::contract(format!("token {bad} out of range for {n_bins} bins")));
        }
        Ok(QuantizedAudioTokens {
            num_frames: tokens.len() / n_bands,
            tokens,
            n_bands,
            n_bins,
            window: 1,
            offset: 0,
        })
    }

    pub fn at(&self, t: usize, d: usize) -> u8 {
        self.tokens[t * self.n_bands + d]
    }

    pub fn frame(&self, t: usize) -> &[u8] {
        &self.tokens[t * self.n_bands..(t + 1) * self.n_bands]
    }

    /// Tokens rescaled to `[0, 1]` as `q / (n_bins − 1)`.
    pub fn as_values(&self) -> Vec<f64> {
        let top = (self.n_bins - 1) as f64;
        self.tokens.iter().map(|&q| q as f64 / top).collect()
    }

    /// `QMEL`, u32 T, u32 D, u32 n_bins, then `T·D` token bytes.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + self.tokens.len());
        out.extend_from_slice(TOKENS_MAGIC);
        for v in [self.num_frames, self.n_bands, self.n_bins] {
            out.extend_from_slice(&(v as u32).to_le_bytes());
        }
        out.extend_from_slice(&self.tokens);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 16 || &bytes[..4] != TOKENS_MAGIC {
            return Err(Error::Parse("not a QMEL token file".into()));
        }
        let u = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (t, d, n_bins) = (u(4), u(8), u(12));
        if bytes.len() != 16 + t * d {
            return Err(Error::Parse(format!(
                "token file has {} bytes, header implies {}",
                bytes.len(),
                16 + t * d
            )));
        }
        Self::new(bytes[16..].to_vec(), d, n_bins).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Human-readable dump: header fields plus one token row per frame.
    pub fn to_json(&self) -> String {
        let rows: Vec<&[u8]> = (0..self.num_frames).map(|t| self.frame(t)).collect();
        serde_json::to_string_pretty(&serde_json::json!({
            "num_frames": self.num_frames,
            "n_bands": self.n_bands,
            "n_bins": self.n_bins,
            "window": self.window,
            "offset": self.offset,
            "tokens": rows,
        }))
        .expect("token json")
    }
}

/// Stride `v[s::w]`, repeat each kept frame `w` times, cut (or pad with the
/// last kept frame) to `T`, then bin every value.
pub fn temporal_quantize<R: Rng + ?Sized>(
    features: &[f64],
    n_bands: usize,
    window: usize,
    n_bins: usize,
    offset: Offset,
    rng: &mut R,
) -> Result<QuantizedAudioTokens> {
    if n_bands == 0 || features.is_empty() || features.len() % n_bands != 0 {
        return Err(Error::contract(format!(
            "{} feature values do not split into {n_bands} bands",
            features.len()
        )));
    }
    let t_len = features.len() / n_bands;
    if window == 0 || window > t_len {
        return Err(Error::contract(format!("window {window} must be in 1..={t_len}")));
    }
    if !(2..=256).contains(&n_bins) {
        return Err(Error::contract(format!("n_bins must be in 2..=256, got {n_bins}")));
    }
    let s = offset.resolve(window, rng);
    if s >= t_len {
        return Err(Error::contract(format!("offset {s} leaves nothing of {t_len} frames")));
    }
    let kept: Vec<usize> = (s..t_len).step_by(window).collect();
    let bin = |v: f64| -> u8 {
        if n_bins == 2 {
            (v > 0.05) as u8
        } else {
            (v * n_bins as f64).floor().clamp(0.0, (n_bins - 1) as f64) as u8
        }
    };
    let mut tokens = Vec::with_capacity(features.len());
    for t in 0..t_len {
        let src = kept[(t / window).min(kept.len() - 1)];
        tokens.extend(features[src * n_bands..(src + 1) * n_bands].iter().map(|&v| bin(v)));
    }
    Ok(QuantizedAudioTokens {
        tokens,
        num_frames: t_len,
        n_bands,
        n_bins,
        window,
        offset: s,
    })
}

pub fn write_tokens(path: &Path, tokens: &QuantizedAudioTokens) -> Result<()> {
    atomic_write(path, &tokens.to_bytes())
}

pub fn read_tokens(path: &Path) -> Result<QuantizedAudioTokens> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    QuantizedAudioTokens::from_bytes(&bytes).map_err(|e| e.with_path(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(0)
    }

    #[test]
    fn constant_half() {
        let q = temporal_quantize(&[0.5; 24], 2, 4, 10, Offset::Center, &mut rng()).unwrap();
        assert!(q.tokens.iter().all(|&t| t == 5));
    }

    #[test]
    fn one_clamps_to_top_bin() {
        let q = temporal_quantize(&[1.0; 4], 1, 1, 10, Offset::Center, &mut rng()).unwrap();
        assert!(q.tokens.iter().all(|&t| t == 9));
    }

    #[test]
    fn hand_trace() {
        let v = [0.0, 0.2, 0.9, 0.1, 0.8];
        let q = temporal_quantize(&v, 1, 2, 2, Offset::Center, &mut rng()).unwrap();
        assert_eq!(q.offset, 1);
        // v[1::2] = [0.2, 0.1] → [0.2, 0.2, 0.1, 0.1] padded with 0.1.
        assert_eq!(q.tokens, vec![1, 1, 1, 1, 1]);
        let q = temporal_quantize(&v, 1, 2, 10, Offset::Center, &mut rng()).unwrap();
        assert_eq!(q.tokens, vec![2, 2, 1, 1, 1]);
    }

    #[test]
    fn contract_errors() {
        assert!(temporal_quantize(&[0.1; 4], 1, 5, 8, Offset::Center, &mut rng()).is_err());
        assert!(temporal_quantize(&[0.1; 4], 1, 2, 1, Offset::Center, &mut rng()).is_err());
        assert!(temporal_quantize(&[0.1; 4], 1, 2, 8, Offset::Fixed(4), &mut rng()).is_err());
        assert!(QuantizedAudioTokens::new(vec![8], 1, 8).is_err());
    }

    #[test]
    fn train_mode_is_seeded() {
        let v: Vec<f64> = (0..200).map(|i| (i as f64 * 0.37).sin().abs()).collect();
        let a = temporal_quantize(&v, 2, 8, 8, Offset::Random, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        let b = temporal_quantize(&v, 2, 8, 8, Offset::Random, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn file_round_trip() {
        let q = temporal_quantize(&[0.1, 0.6, 0.9, 0.3], 2, 1, 8, Offset::Center, &mut rng()).unwrap();
        let back = QuantizedAudioTokens::from_bytes(&q.to_bytes()).unwrap();
        assert_eq!(back.tokens, q.tokens);
        assert_eq!((back.num_frames, back.n_bands, back.n_bins), (2, 2, 8));
        assert!(QuantizedAudioTokens::from_bytes(&q.to_bytes()[..17]).is_err());
        let json: serde_json::Value = serde_json::from_str(&q.to_json()).unwrap();
        assert_eq!(json["tokens"][1][0], 7);
    }

    proptest! {
        #[test]
        fn windows_are_constant_and_requantizing_is_stable(
            v in proptest::collection::vec(0.0f64..=1.0, 3..120),
            w in 1usize..9, n_bins in 2usize..12,
        ) {
            let d = 3;
            let t = v.len() / d;
            prop_assume!(t >= w);
            let v = &v[..t * d];
            let q = temporal_quantize(v, d, w, n_bins, Offset::Center, &mut rng()).unwrap();
            for k in 0..t {
                prop_assert_eq!(q.frame(k), q.frame(k - k % w));
            }
            let again = temporal_quantize(&q.as_values(), d, w, n_bins, Offset::Center, &mut rng()).unwrap();
            prop_assert_eq!(&again.tokens, &q.tokens);
        }
    }
}
