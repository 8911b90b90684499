use std::io::Cursor;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::atomic_write;

/// Mono samples in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::contract("sample rate must be positive"));
        }
        if samples.iter().any(|s| !s.is_finite()) {
            return Err(Error::contract("audio samples must be finite"));
        }
        Ok(AudioSignal { samples, sample_rate })
    }

    pub fn silence(seconds: f64, sample_rate: u32) -> Self {
        let n = (seconds * sample_rate as f64).round() as usize;
        AudioSignal { samples: vec![0.0; n], sample_rate }
    }

    pub fn duration(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }

    /// 16-bit PCM mono WAV bytes; samples outside `[-1, 1]` are clipped.
    pub fn to_wav_bytes(&self) -> Result<Vec<u8>> {
        let spec = hound::WavSpec {
            channels: 1,
            sample_rate: self.sample_rate,
            bits_per_sample: 16,
            sample_format: hound::SampleFormat::Int,
        };
        let mut buf = Cursor::new(Vec::new());
        {
            let mut w = hound::WavWriter::new(&mut buf, spec).map_err(wav_err)?;
            for &s in &self.samples {
                let q = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
                w.write_sample(q).map_err(wav_err)?;
            }
            w.finalize().map_err(wav_err)?;
        }
        Ok(buf.into_inner())
    }

    pub fn from_wav_bytes(bytes: &[u8]) -> Result<Self> {
        let reader = hound::WavReader::new(Cursor::new(bytes)).map_err(wav_err)?;
        let spec = reader.spec();
        if spec.channels != 1 {
            return Err(Error::UnsupportedFormat(format!(
                "{} channels; only mono is supported",
                spec.channels
            )));
        }
        if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
            return Err(Error::UnsupportedFormat(format!(
                "{}-bit {:?}; only 16-bit PCM is supported",
                spec.bits_per_sample, spec.sample_format
            )));
        }
        let samples = reader
            .into_samples::<i16>()
            .map(|s| s.map(|v| v as f64 / 32768.0))
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(wav_err)?;
        AudioSignal::new(samples, spec.sample_rate)
    }
}

fn wav_err(e: hound::Error) -> Error {
    match e {
        hound::Error::Unsupported => Error::UnsupportedFormat("unsupported WAV encoding".into()),
        hound::Error::FormatError(m) => Error::Parse(format!("malformed WAV: {m}")),
        other => Error::Parse(format!("malformed WAV: {other}")),
    }
}

pub fn load_wav(path: &Path) -> Result<AudioSignal> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    AudioSignal::from_wav_bytes(&bytes).map_err(|e| e.with_path(path))
}

pub fn write_wav(path: &Path, signal: &AudioSignal) -> Result<()> {
    atomic_write(path, &signal.to_wav_bytes()?)
}
