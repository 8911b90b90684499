use std::path::Path;

use super::{MotionSequence, MOTION_DIM};
use crate::error::{Error, Result};
use crate::io::atomic_write;

pub const MOTION_MAGIC: &[u8; 4] = b"MOTN";
const HEADER: usize = 16;

impl MotionSequence {
    /// `MOTN`, u32 T, u32 D, f32 fps, `T·D` f64 values, `T` mask bytes; all little-endian.
    pub fn to_bytes(&self) -> Vec<u8> {
        let t = self.num_frames();
        let mut out = Vec::with_capacity(HEADER + t * MOTION_DIM * 8 + t);
        out.extend_from_slice(MOTION_MAGIC);
        out.extend_from_slice(&(t as u32).to_le_bytes());
        out.extend_from_slice(&(MOTION_DIM as u32).to_le_bytes());
        out.extend_from_slice(&(self.fps as f32).to_le_bytes());
        for v in self.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend(self.mask.iter().map(|&m| m as u8));
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < HEADER {
            return Err(Error::Parse(format!("motion file too short: {} bytes", bytes.len())));
        }
        if &bytes[..4] != MOTION_MAGIC {
            return Err(Error::Parse("bad motion magic".into()));
        }
        let u32_at = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap()) as usize;
        let (t, d) = (u32_at(4), u32_at(8));
        let fps = f32::from_le_bytes(bytes[12..16].try_into().unwrap()) as f64;
        if d != MOTION_DIM {
            return Err(Error::Parse(format!("motion dimension {d}, expected {MOTION_DIM}")));
        }
        let expected = HEADER + t * d * 8 + t;
        if bytes.len() != expected {
            return Err(Error::Parse(format!(
                "motion file has {} bytes, header implies {expected}",
                bytes.len()
            )));
        }
        let body = &bytes[HEADER..HEADER + t * d * 8];
        let frames = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mask = bytes[HEADER + t * d * 8..].iter().map(|&b| b != 0).collect();
        MotionSequence::with_mask(frames, fps, mask).map_err(|e| Error::Parse(e.to_string()))
    }
}

pub fn write_motion(path: &Path, motion: &MotionSequence) -> Result<()> {
    atomic_write(path, &motion.to_bytes())
}

pub fn read_motion(path: &Path) -> Result<MotionSequence> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    MotionSequence::from_bytes(&bytes).map_err(|e| e.with_path(path))
}
