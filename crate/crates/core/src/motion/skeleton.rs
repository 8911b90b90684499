use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_SKELETON: &str = include_str!("../../data/skeleton55.json");

/// Fixed-offset kinematic tree.
///
/// Joints are topologically ordered (`parents[j] < j`) with a single root at
/// index 0 whose parent is `-1`. Offsets are in meters, expressed in the
/// parent's frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Skeleton {
    pub parents: Vec<i32>,
    pub offsets: Vec<[f64; 3]>,
    pub foot_joints: Vec<usize>,
    /// Joints used for motion-beat velocity: spine, neck, head and arms.
    #[serde(default)]
    pub upper_body: Vec<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub names: Vec<String>,
}

impl Default for Skeleton {
    fn default() -> Self {
        Skeleton::standard()
    }
}

impl Skeleton {
    /// The bundled 55-joint skeleton with an SMPL-X style hierarchy.
    pub fn standard() -> Self {
        Self::from_json(DEFAULT_SKELETON).expect("bundled skeleton is valid")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let sk: Skeleton =
            serde_json::from_str(s).map_err(|e| Error::Parse(format!("skeleton: {e}")))?;
        sk.validate()?;
        Ok(sk)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s).map_err(|e| e.with_path(path))
    }

    pub fn num_joints(&self) -> usize {
        self.parents.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.parents.is_empty() {
            return Err(Error::contract("skeleton has no joints"));
        }
        if self.offsets.len() != self.parents.len() {
            return Err(Error::contract(format!(
                "skeleton has {} parents but {} offsets",
                self.parents.len(),
                self.offsets.len()
            )));
        }
        if self.parents[0] != -1 {
            return Err(Error::contract("joint 0 must be the root"));
        }
        for (j, &p) in self.parents.iter().enumerate().skip(1) {
            if p < 0 || p as usize >= j {
                return Err(Error::contract(format!(
                    "joint {j} has parent {p}; parents must precede children and only joint 0 is a root"
                )));
            }
        }
        let n = self.num_joints();
        if let Some(&bad) = self.foot_joints.iter().chain(&self.upper_body).find(|&&j| j >= n) {
            return Err(Error::contract(format!("joint index {bad} out of range")));
        }
        Ok(())
    }

    /// Rest-pose joint positions (identity rotations, zero root translation).
    pub fn rest_positions(&self) -> Vec<[f64; 3]> {
        let mut out: Vec<[f64; 3]> = Vec::with_capacity(self.num_joints());
        for (j, &p) in self.parents.iter().enumerate() {
            if p < 0 {
                out.push([0.0; 3]);
            } else {
                let base = out[p as usize];
                let o = self.offsets[j];
                out.push([base[0] + o[0], base[1] + o[1], base[2] + o[2]]);
            }
        }
        out
    }

    /// Joints subset used for beat velocities, falling back to all joints.
    pub fn beat_joints(&self) -> Vec<usize> {
        if self.upper_body.is_empty() {
            (0..self.num_joints()).collect()
        } else {
            self.upper_body.clone()
        }
    }
}
