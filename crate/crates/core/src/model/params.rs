use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::ModelConfig;
use crate::autodiff::{Graph, Tensor, Var};
use crate::error::{Error, Result};

/// Named parameter tensors in a fixed order.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    index: HashMap<String, usize>,
}

/// How a parameter is initialized.
#[derive(Debug, Clone, Copy, PartialEq)]
enum Init {
    Normal,
    Zero,
    One,
    /// Normal except the listed `H`-wide column blocks, which start at zero.
    NormalZeroBlocks(&'static [usize]),
}

impl ParamStore {
    pub fn new(entries: Vec<(String, Tensor)>) -> Result<Self> {
        let mut index = HashMap::new();
        for (i, (n, _)) in entries.iter().enumerate() {
            if index.insert(n.clone(), i).is_some() {
                return Err(Error::contract(format!("duplicate parameter name {n}")));
            }
        }
        let (names, tensors) = entries.into_iter().unzip();
        Ok(ParamStore { names, tensors, index })
    }

    /// adaLN-Zero style initialization: small normal weights, zero biases,
    /// unit norm scales, zero gate columns and a zero output layer.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Result<Self> {
        cfg.validate()?;
        let normal = Normal::new(0.0, cfg.init_std).map_err(|e| Error::contract(e.to_string()))?;
        let entries = layout(cfg)
            .into_iter()
            .map(|(name, shape, init)| {
                let n: usize = shape.iter().product();
                let cols = *shape.last().unwrap();
                let data = match init {
                    Init::Zero => vec![0.0; n],
                    Init::One => vec![1.0; n],
                    Init::Normal => (0..n).map(|_| normal.sample(rng)).collect(),
                    Init::NormalZeroBlocks(blocks) => (0..n)
                        .map(|i| {
                            let v = normal.sample(rng);
                            if blocks.contains(&((i % cols) / cfg.hidden)) {
                                0.0
                            } else {
                                v
                            }
                        })
                        .collect(),
                };
                Ok((name, Tensor::new(shape, data)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(entries)
    }

    /// Check names and shapes against the layout `cfg` implies.
    pub fn check_layout(&self, cfg: &ModelConfig) -> Result<()> {
        let want = layout(cfg);
        if want.len() != self.len() {
            return Err(Error::contract(format!(
                "config implies {} parameters, store has {}",
                want.len(),
                self.len()
            )));
        }
        for ((name, shape, _), (have, t)) in want.iter().zip(self.iter()) {
            if name != have || shape.as_slice() != t.shape() {
                return Err(Error::contract(format!(
                    "parameter {have} {:?} does not match expected {name} {shape:?}",
                    t.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::numel).sum()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn tensors(&self) -> &[Tensor] {
        &self.tensors
    }

    pub fn tensors_mut(&mut self) -> &mut [Tensor] {
        &mut self.tensors
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index.get(name).map(|&i| &self.tensors[i])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.index.get(name).map(|&i| &mut self.tensors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.tensors)
    }

    pub fn into_entries(self) -> Vec<(String, Tensor)> {
        self.names.into_iter().zip(self.tensors).collect()
    }

    /// Address existing graph nodes (one per parameter, in order) by name.
    pub fn bind_vars<'g>(&self, vars: Vec<Var<'g>>) -> Result<Bound<'g, '_>> {
        if vars.len() != self.len() {
            return Err(Error::contract(format!("{} vars for {} parameters", vars.len(), self.len())));
        }
        Ok(Bound { vars, index: &self.index })
    }

    /// Leaves on `g`, trainable or constant.
    pub fn bind<'g>(&self, g: &'g Graph, trainable: bool) -> Bound<'g, '_> {
        Bound {
            vars: self.tensors.iter().map(|t| g.leaf(t.clone(), trainable)).collect(),
            index: &self.index,
        }
    }
}

/// Parameters placed on a graph, addressable by name.
pub struct Bound<'g, 's> {
    pub vars: Vec<Var<'g>>,
    index: &'s HashMap<String, usize>,
}

impl<'g> Bound<'g, '_> {
    pub fn get(&self, name: &str) -> Var<'g> {
        match self.index.get(name) {
            Some(&i) => self.vars[i],
            None => panic!("unknown parameter {name}"),
        }
    }
}

fn linear(out: &mut Vec<(String, Vec<usize>, Init)>, name: &str, i: usize, o: usize, init: Init) {
    out.push((format!("{name}.w"), vec![i, o], init));
    out.push((format!("{name}.b"), vec![o], Init::Zero));
}

fn layout(cfg: &ModelConfig) -> Vec<(String, Vec<usize>, Init)> {
    let (h, m, d) = (cfg.hidden, cfg.mlp_hidden(), cfg.head_dim());
    let mut v = Vec::new();
    v.push(("audio_embed".to_string(), vec![cfg.n_bands * cfg.n_bins, h], Init::Normal));
    linear(&mut v, "audio_in", h, h, Init::Normal);
    linear(&mut v, "motion_in", cfg.motion_dim, h, Init::Normal);
    linear(&mut v, "time.fc1", h, h, Init::Normal);
    linear(&mut v, "time.fc2", h, h, Init::Normal);
    for i in 0..cfg.dual_blocks {
        for s in ["audio", "motion"] {
            let p = format!("dual{i}.{s}");
            linear(&mut v, &format!("{p}.mod"), h, 6 * h, Init::NormalZeroBlocks(&[2, 5]));
            linear(&mut v, &format!("{p}.qkv"), h, 3 * h, Init::Normal);
            v.push((format!("{p}.q_norm"), vec![d], Init::One));
            v.push((format!("{p}.k_norm"), vec![d], Init::One));
            linear(&mut v, &format!("{p}.proj"), h, h, Init::Normal);
            linear(&mut v, &format!("{p}.mlp_in"), h, m, Init::Normal);
            linear(&mut v, &format!("{p}.mlp_out"), m, h, Init::Normal);
        }
    }
    for j in 0..cfg.fusion_blocks {
        let p = format!("fusion{j}");
        linear(&mut v, &format!("{p}.mod"), h, 3 * h, Init::NormalZeroBlocks(&[2]));
        linear(&mut v, &format!("{p}.fc1"), h, 3 * h + m, Init::Normal);
        v.push((format!("{p}.q_norm"), vec![d], Init::One));
        v.push((format!("{p}.k_norm"), vec![d], Init::One));
        linear(&mut v, &format!("{p}.fc2"), h + m, h, Init::Normal);
    }
    linear(&mut v, "final.mod", h, 2 * h, Init::Normal);
    linear(&mut v, "final.out", h, cfg.motion_dim, Init::Zero);
    v
}
