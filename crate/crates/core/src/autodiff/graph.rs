use std::cell::{Ref, RefCell};
use std::sync::Arc;

use super::tensor::{matmul_raw, transpose_raw, Tensor};
use crate::error::{Error, Result};

/// Backward rule for an operation whose forward value was computed outside
/// the graph (fused kernels such as forward kinematics).
pub trait CustomOp {
    fn name(&self) -> &'static str;

    /// Vector-Jacobian product. Returns one gradient buffer per input, `None`
    /// for inputs that do not depend on the output.
    fn backward(&self, inputs: &[&Tensor], output: &Tensor, grad: &[f64]) -> Vec<Option<Vec<f64>>>;
}

pub(crate) enum Op {
    Leaf,
    Add(usize, usize),
    Sub(usize, usize),
    Mul(usize, usize),
    AddRow(usize, usize),
    MulRow(usize, usize),
    AddScalar(usize),
    Scale(usize, f64),
    ScaleRows(usize, Arc<Vec<f64>>),
    MatMul(usize, usize),
    Transpose(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    SliceRows(usize, usize),
    SliceCols(usize, usize),
    LayerNorm(usize, Vec<f64>),
    RmsNorm(usize, Vec<f64>),
    Softmax(usize),
    Gelu(usize),
    Silu(usize),
    Square(usize),
    Sum(usize),
    Rope {
        src: usize,
        cos: Arc<Vec<f64>>,
        sin: Arc<Vec<f64>>,
        head_dim: usize,
    },
    EmbeddingSum {
        table: usize,
        indices: Arc<Vec<usize>>,
        per_row: usize,
    },
    Custom(Vec<usize>, Box<dyn CustomOp>),
}

pub(crate) struct Node {
    pub(crate) value: Tensor,
    pub(crate) op: Op,
    pub(crate) requires_grad: bool,
}

/// Define-by-run tape. Every operation on a [`Var`] appends a node; the
/// graph is discarded after the backward pass.
///
/// A graph is confined to one thread. Run independent samples on separate
/// graphs to parallelize.
#[derive(Default)]
pub struct Graph {
    nodes: RefCell<Vec<Node>>,
}

/// Handle to a node on a [`Graph`].
#[derive(Clone, Copy)]
pub struct Var<'g> {
    pub(crate) graph: &'g Graph,
    pub(crate) id: usize,
}

impl std::fmt::Debug for Var<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Var#{}{:?}", self.id, self.graph.nodes.borrow()[self.id].value.shape())
    }
}

impl Graph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// A trainable leaf.
    pub fn param(&self, t: Tensor) -> Var<'_> {
        self.push(t, Op::Leaf, true)
    }

    /// A constant leaf; no gradient flows into it.
    pub fn constant(&self, t: Tensor) -> Var<'_> {
        self.push(t, Op::Leaf, false)
    }

    pub fn leaf(&self, t: Tensor, requires_grad: bool) -> Var<'_> {
        self.push(t, Op::Leaf, requires_grad)
    }

    pub(crate) fn push(&self, value: Tensor, op: Op, requires_grad: bool) -> Var<'_> {
        let mut nodes = self.nodes.borrow_mut();
        nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var {
            graph: self,
            id: nodes.len() - 1,
        }
    }

    pub(crate) fn nodes(&self) -> Ref<'_, Vec<Node>> {
        self.nodes.borrow()
    }

    /// Record a fused operation whose value the caller already computed.
    pub fn custom<'g>(&'g self, inputs: &[Var<'g>], value: Tensor, op: Box<dyn CustomOp>) -> Var<'g> {
        let rg = inputs.iter().any(|v| v.requires_grad());
        let ids = inputs.iter().map(|v| v.id).collect();
        self.push(value, Op::Custom(ids, op), rg)
    }

    /// Reverse-mode sweep from a scalar `loss`.
    pub fn backward(&self, loss: Var<'_>) -> Result<Gradients> {
        let nodes = self.nodes.borrow();
        if nodes[loss.id].value.numel() != 1 {
            return Err(Error::contract(format!(
                "backward requires a scalar loss, got shape {:?}",
                nodes[loss.id].value.shape()
            )));
        }
        let mut grads: Vec<Option<Vec<f64>>> = (0..nodes.len()).map(|_| None).collect();
        grads[loss.id] = Some(vec![1.0]);

        for id in (0..=loss.id).rev() {
            let node = &nodes[id];
            if !node.requires_grad {
                continue;
            }
            let Some(g) = grads[id].take() else { continue };
            let contributions = backward_node(&nodes, id, &g);
            for (input, contrib) in contributions {
                if !nodes[input].requires_grad {
                    continue;
                }
                match &mut grads[input] {
                    Some(acc) => acc.iter_mut().zip(&contrib).for_each(|(a, c)| *a += c),
                    slot @ None => *slot = Some(contrib),
                }
            }
            if matches!(node.op, Op::Leaf) {
                grads[id] = Some(g);
            }
        }

        let out = grads
            .into_iter()
            .enumerate()
            .map(|(id, g)| match (&nodes[id].op, g) {
                (Op::Leaf, Some(g)) => Some(
                    Tensor::new(nodes[id].value.shape().to_vec(), g).expect("gradient shape"),
                ),
                _ => None,
            })
            .collect();
        Ok(Gradients { grads: out })
    }
}

/// Gradients of the leaves reached by a backward sweep.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var<'_>) -> Option<&Tensor> {
        self.grads.get(v.id).and_then(|g| g.as_ref())
    }

    /// Gradient for `v`, or zeros shaped like `like` when no path reached it.
    pub fn get_or_zeros(&self, v: Var<'_>, like: &Tensor) -> Tensor {
        self.get(v)
            .cloned()
            .unwrap_or_else(|| Tensor::zeros(like.shape().to_vec()))
    }
}

fn dims(t: &Tensor) -> (usize, usize) {
    t.dims2()
}

fn backward_node(nodes: &[Node], id: usize, g: &[f64]) -> Vec<(usize, Vec<f64>)> {
    let node = &nodes[id];
    let val = |i: usize| &nodes[i].value;
    match &node.op {
        Op::Leaf => vec![],
        Op::Add(a, b) => vec![(*a, g.to_vec()), (*b, g.to_vec())],
        Op::Sub(a, b) => vec![(*a, g.to_vec()), (*b, g.iter().map(|v| -v).collect())],
        Op::Mul(a, b) => {
            let (av, bv) = (val(*a).data(), val(*b).data());
            vec![
                (*a, g.iter().zip(bv).map(|(g, b)| g * b).collect()),
                (*b, g.iter().zip(av).map(|(g, a)| g * a).collect()),
            ]
        }
        Op::AddRow(a, r) => {
            let (_, c) = dims(val(*a));
            let mut gr = vec![0.0; c];
            for chunk in g.chunks(c) {
                gr.iter_mut().zip(chunk).for_each(|(s, v)| *s += v);
            }
            vec![(*a, g.to_vec()), (*r, gr)]
        }
        Op::MulRow(a, r) => {
            let (_, c) = dims(val(*a));
            let av = val(*a).data();
            let rv = val(*r).data();
            let mut ga = vec![0.0; g.len()];
            let mut gr = vec![0.0; c];
            for (i, (gi, ai)) in g.iter().zip(av).enumerate() {
                let j = i % c;
                ga[i] = gi * rv[j];
                gr[j] += gi * ai;
            }
            vec![(*a, ga), (*r, gr)]
        }
        Op::AddScalar(a) => vec![(*a, g.to_vec())],
        Op::Scale(a, s) => vec![(*a, g.iter().map(|v| v * s).collect())],
        Op::ScaleRows(a, w) => {
            let (_, c) = dims(val(*a));
            let ga = g
                .iter()
                .enumerate()
                .map(|(i, v)| v * w[i / c])
                .collect();
            vec![(*a, ga)]
        }
        Op::MatMul(a, b) => {
            let (m, k) = dims(val(*a));
            let (_, n) = dims(val(*b));
            let bt = transpose_raw(val(*b).data(), k, n);
            let at = transpose_raw(val(*a).data(), m, k);
            let ga = matmul_raw(g, &bt, m, n, k);
            let gb = matmul_raw(&at, g, k, m, n);
            vec![(*a, ga), (*b, gb)]
        }
        Op::Transpose(a) => {
            let (r, c) = dims(val(*a));
            // g is c×r
            vec![(*a, transpose_raw(g, c, r))]
        }
        Op::ConcatRows(parts) => {
            let mut off = 0;
            parts
                .iter()
                .map(|&p| {
                    let n = val(p).numel();
                    let s = g[off..off + n].to_vec();
                    off += n;
                    (p, s)
                })
                .collect()
        }
        Op::ConcatCols(parts) => {
            let (rows, total) = dims(&node.value);
            let mut off = 0;
            parts
                .iter()
                .map(|&p| {
                    let (_, c) = dims(val(p));
                    let mut s = Vec::with_capacity(rows * c);
                    for r in 0..rows {
                        s.extend_from_slice(&g[r * total + off..r * total + off + c]);
                    }
                    off += c;
                    (p, s)
                })
                .collect()
        }
        Op::SliceRows(a, start) => {
            let (_, c) = dims(val(*a));
            let mut ga = vec![0.0; val(*a).numel()];
            ga[start * c..start * c + g.len()].copy_from_slice(g);
            vec![(*a, ga)]
        }
        Op::SliceCols(a, start) => {
            let (rows, c) = dims(val(*a));
            let (_, w) = dims(&node.value);
            let mut ga = vec![0.0; rows * c];
            for r in 0..rows {
                ga[r * c + start..r * c + start + w].copy_from_slice(&g[r * w..(r + 1) * w]);
            }
            vec![(*a, ga)]
        }
        Op::LayerNorm(a, inv_std) => {
            let (_, c) = dims(val(*a));
            let y = node.value.data();
            let mut ga = vec![0.0; g.len()];
            for (r, &rs) in inv_std.iter().enumerate() {
                let gr = &g[r * c..(r + 1) * c];
                let yr = &y[r * c..(r + 1) * c];
                let mg = gr.iter().sum::<f64>() / c as f64;
                let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                for j in 0..c {
                    ga[r * c + j] = rs * (gr[j] - mg - yr[j] * mgy);
                }
            }
            vec![(*a, ga)]
        }
        Op::RmsNorm(a, inv_rms) => {
            let (_, c) = dims(val(*a));
            let y = node.value.data();
            let mut ga = vec![0.0; g.len()];
            for (r, &rs) in inv_rms.iter().enumerate() {
                let gr = &g[r * c..(r + 1) * c];
                let yr = &y[r * c..(r + 1) * c];
                let mgy = gr.iter().zip(yr).map(|(a, b)| a * b).sum::<f64>() / c as f64;
                for j in 0..c {
                    ga[r * c + j] = rs * (gr[j] - yr[j] * mgy);
                }
            }
            vec![(*a, ga)]
        }
        Op::Softmax(a) => {
            let (_, c) = dims(val(*a));
            let y = node.value.data();
            let mut ga = vec![0.0; g.len()];
            for ((gr, yr), out) in g.chunks(c).zip(y.chunks(c)).zip(ga.chunks_mut(c)) {
                let dot: f64 = gr.iter().zip(yr).map(|(a, b)| a * b).sum();
                for j in 0..c {
                    out[j] = yr[j] * (gr[j] - dot);
                }
            }
            vec![(*a, ga)]
        }
        Op::Gelu(a) => {
            let x = val(*a).data();
            vec![(*a, g.iter().zip(x).map(|(g, &x)| g * gelu_grad(x)).collect())]
        }
        Op::Silu(a) => {
            let x = val(*a).data();
            let ga = g
                .iter()
                .zip(x)
                .map(|(g, &x)| {
                    let s = sigmoid(x);
                    g * s * (1.0 + x * (1.0 - s))
                })
                .collect();
            vec![(*a, ga)]
        }
        Op::Square(a) => {
            let x = val(*a).data();
            vec![(*a, g.iter().zip(x).map(|(g, x)| 2.0 * g * x).collect())]
        }
        Op::Sum(a) => vec![(*a, vec![g[0]; val(*a).numel()])],
        Op::Rope {
            src,
            cos,
            sin,
            head_dim,
        } => {
            let (rows, c) = dims(val(*src));
            let half = head_dim / 2;
            let mut ga = g.to_vec();
            for r in 0..rows {
                for h in 0..c / head_dim {
                    for i in 0..half {
                        let (ia, ib) = (r * c + h * head_dim + i, r * c + h * head_dim + i + half);
                        let (co, si) = (cos[r * half + i], sin[r * half + i]);
                        ga[ia] = g[ia] * co + g[ib] * si;
                        ga[ib] = -g[ia] * si + g[ib] * co;
                    }
                }
            }
            vec![(*src, ga)]
        }
        Op::EmbeddingSum {
            table,
            indices,
            per_row,
        } => {
            let (_, h) = dims(val(*table));
            let mut gt = vec![0.0; val(*table).numel()];
            for (r, idx) in indices.chunks(*per_row).enumerate() {
                let gr = &g[r * h..(r + 1) * h];
                for &i in idx {
                    gt[i * h..(i + 1) * h]
                        .iter_mut()
                        .zip(gr)
                        .for_each(|(a, b)| *a += b);
                }
            }
            vec![(*table, gt)]
        }
        Op::Custom(inputs, op) => {
            let ins: Vec<&Tensor> = inputs.iter().map(|&i| val(i)).collect();
            op.backward(&ins, &node.value, g)
                .into_iter()
                .zip(inputs)
                .filter_map(|(gr, &i)| gr.map(|gr| (i, gr)))
                .collect()
        }
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

const GELU_C: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_K: f64 = 0.044715;

/// Tanh-approximated GELU.
pub(crate) fn gelu(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_C * (x + GELU_K * x * x * x)).tanh())
}

fn gelu_grad(x: f64) -> f64 {
    let u = GELU_C * (x + GELU_K * x * x * x);
    let t = u.tanh();
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * GELU_C * (1.0 + 3.0 * GELU_K * x * x)
}
