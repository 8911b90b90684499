//! Differentiable primitives on [`Var`].
//!
//! Everything is 2-D: rank-1 tensors act as a single row. Row-vector
//! broadcasting is explicit (`add_row`, `mul_row`) rather than implicit.

use std::sync::Arc;

use super::graph::{gelu, sigmoid, Graph, Op, Var};
use super::tensor::{matmul_raw, transpose_raw, Tensor};
use crate::error::{Error, Result};

/// Stabilizer shared by layer-norm and RMS-norm.
pub const NORM_EPS: f64 = 1e-6;

impl<'g> Var<'g> {
    pub fn id(&self) -> usize {
        self.id
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn value(&self) -> Tensor {
        self.graph.nodes()[self.id].value.clone()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.graph.nodes()[self.id].value.shape().to_vec()
    }

    pub fn dims2(&self) -> (usize, usize) {
        self.graph.nodes()[self.id].value.dims2()
    }

    pub fn requires_grad(&self) -> bool {
        self.graph.nodes()[self.id].requires_grad
    }

    pub fn item(&self) -> f64 {
        self.graph.nodes()[self.id].value.item()
    }

    fn unary(&self, value: Tensor, op: Op) -> Var<'g> {
        self.graph.push(value, op, self.requires_grad())
    }

    fn binary(&self, other: &Var<'g>, value: Tensor, op: Op) -> Var<'g> {
        let rg = self.requires_grad() || other.requires_grad();
        self.graph.push(value, op, rg)
    }

    fn same_shape(&self, other: &Var<'g>, op: &'static str) -> Result<()> {
        let (a, b) = (self.shape(), other.shape());
        if a != b {
            return Err(Error::shape(op, &a, &b));
        }
        Ok(())
    }

    fn zip_with(&self, other: &Var<'g>, f: impl Fn(f64, f64) -> f64) -> Tensor {
        let nodes = self.graph.nodes();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        let data = a.data().iter().zip(b.data()).map(|(&x, &y)| f(x, y)).collect();
        Tensor::new(a.shape().to_vec(), data).expect("zip_with shape")
    }

    fn map_value(&self, f: impl Fn(f64) -> f64) -> Tensor {
        self.graph.nodes()[self.id].value.map(f)
    }

    pub fn add(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.same_shape(other, "add")?;
        let v = self.zip_with(other, |a, b| a + b);
        Ok(self.binary(other, v, Op::Add(self.id, other.id)))
    }

    pub fn sub(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.same_shape(other, "sub")?;
        let v = self.zip_with(other, |a, b| a - b);
        Ok(self.binary(other, v, Op::Sub(self.id, other.id)))
    }

    pub fn mul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        self.same_shape(other, "mul")?;
        let v = self.zip_with(other, |a, b| a * b);
        Ok(self.binary(other, v, Op::Mul(self.id, other.id)))
    }

    fn row_op(
        &self,
        row: &Var<'g>,
        name: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let nodes = self.graph.nodes();
        let (a, r) = (&nodes[self.id].value, &nodes[row.id].value);
        let (_, c) = a.dims2();
        if r.numel() != c {
            return Err(Error::shape(name, a.shape(), r.shape()));
        }
        let rv = r.data();
        let data = a
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| f(x, rv[i % c]))
            .collect();
        Ok(Tensor::new(a.shape().to_vec(), data).expect("row op shape"))
    }

    /// `self[r, c] + row[c]` for every row.
    pub fn add_row(&self, row: &Var<'g>) -> Result<Var<'g>> {
        let v = self.row_op(row, "add_row", |a, b| a + b)?;
        Ok(self.binary(row, v, Op::AddRow(self.id, row.id)))
    }

    /// `self[r, c] * row[c]` for every row.
    pub fn mul_row(&self, row: &Var<'g>) -> Result<Var<'g>> {
        let v = self.row_op(row, "mul_row", |a, b| a * b)?;
        Ok(self.binary(row, v, Op::MulRow(self.id, row.id)))
    }

    pub fn add_scalar(&self, s: f64) -> Var<'g> {
        let v = self.map_value(|x| x + s);
        self.unary(v, Op::AddScalar(self.id))
    }

    pub fn scale(&self, s: f64) -> Var<'g> {
        let v = self.map_value(|x| x * s);
        self.unary(v, Op::Scale(self.id, s))
    }

    /// Multiply row `r` by the constant `weights[r]`.
    pub fn scale_rows(&self, weights: &[f64]) -> Result<Var<'g>> {
        let nodes = self.graph.nodes();
        let a = &nodes[self.id].value;
        let (rows, c) = a.dims2();
        if weights.len() != rows {
            return Err(Error::shape("scale_rows", a.shape(), &[weights.len()]));
        }
        let data = a
            .data()
            .iter()
            .enumerate()
            .map(|(i, x)| x * weights[i / c])
            .collect();
        let v = Tensor::new(a.shape().to_vec(), data).expect("scale_rows shape");
        drop(nodes);
        Ok(self.unary(v, Op::ScaleRows(self.id, Arc::new(weights.to_vec()))))
    }

    pub fn matmul(&self, other: &Var<'g>) -> Result<Var<'g>> {
        let nodes = self.graph.nodes();
        let (a, b) = (&nodes[self.id].value, &nodes[other.id].value);
        let (m, k) = a.dims2();
        let (k2, n) = b.dims2();
        if k != k2 {
            return Err(Error::shape("matmul", a.shape(), b.shape()));
        }
        let data = matmul_raw(a.data(), b.data(), m, k, n);
        drop(nodes);
        let v = Tensor::from_matrix(m, n, data)?;
        Ok(self.binary(other, v, Op::MatMul(self.id, other.id)))
    }

    pub fn transpose(&self) -> Var<'g> {
        let v = {
            let nodes = self.graph.nodes();
            let a = &nodes[self.id].value;
            let (r, c) = a.dims2();
            Tensor::from_matrix(c, r, transpose_raw(a.data(), r, c)).expect("transpose shape")
        };
        self.unary(v, Op::Transpose(self.id))
    }

    pub fn concat_rows(parts: &[Var<'g>]) -> Result<Var<'g>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_rows of nothing"))?;
        let g = first.graph;
        let nodes = g.nodes();
        let c = nodes[first.id].value.cols();
        let mut data = Vec::new();
        let mut rows = 0;
        for p in parts {
            let t = &nodes[p.id].value;
            if t.cols() != c {
                return Err(Error::shape("concat_rows", nodes[first.id].value.shape(), t.shape()));
            }
            rows += t.rows();
            data.extend_from_slice(t.data());
        }
        drop(nodes);
        let rg = parts.iter().any(|p| p.requires_grad());
        let v = Tensor::from_matrix(rows, c, data)?;
        Ok(g.push(v, Op::ConcatRows(parts.iter().map(|p| p.id).collect()), rg))
    }

    pub fn concat_cols(parts: &[Var<'g>]) -> Result<Var<'g>> {
        let first = parts
            .first()
            .ok_or_else(|| Error::contract("concat_cols of nothing"))?;
        let g = first.graph;
        let nodes = g.nodes();
        let rows = nodes[first.id].value.rows();
        let mut total = 0;
        for p in parts {
            let t = &nodes[p.id].value;
            if t.rows() != rows {
                return Err(Error::shape("concat_cols", nodes[first.id].value.shape(), t.shape()));
            }
            total += t.cols();
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(nodes[p.id].value.row(r));
            }
        }
        drop(nodes);
        let rg = parts.iter().any(|p| p.requires_grad());
        let v = Tensor::from_matrix(rows, total, data)?;
        Ok(g.push(v, Op::ConcatCols(parts.iter().map(|p| p.id).collect()), rg))
    }

    pub fn slice_rows(&self, start: usize, len: usize) -> Result<Var<'g>> {
        let v = {
            let nodes = self.graph.nodes();
            let a = &nodes[self.id].value;
            let (r, c) = a.dims2();
            if len == 0 || start + len > r {
                return Err(Error::shape("slice_rows", a.shape(), &[start, len]));
            }
            Tensor::from_matrix(len, c, a.data()[start * c..(start + len) * c].to_vec())?
        };
        Ok(self.unary(v, Op::SliceRows(self.id, start)))
    }

    pub fn slice_cols(&self, start: usize, len: usize) -> Result<Var<'g>> {
        let v = {
            let nodes = self.graph.nodes();
            let a = &nodes[self.id].value;
            let (r, c) = a.dims2();
            if len == 0 || start + len > c {
                return Err(Error::shape("slice_cols", a.shape(), &[start, len]));
            }
            let mut data = Vec::with_capacity(r * len);
            for row in 0..r {
                data.extend_from_slice(&a.row(row)[start..start + len]);
            }
            Tensor::from_matrix(r, len, data)?
        };
        Ok(self.unary(v, Op::SliceCols(self.id, start)))
    }

    /// Per-row standardization without affine parameters.
    /// A constant row maps to zeros.
    pub fn layer_norm(&self) -> Var<'g> {
        let (v, inv) = {
            let nodes = self.graph.nodes();
            let a = &nodes[self.id].value;
            let (r, c) = a.dims2();
            let mut out = vec![0.0; a.numel()];
            let mut inv = Vec::with_capacity(r);
            for (row, dst) in a.data().chunks(c).zip(out.chunks_mut(c)) {
                let mean = row.iter().sum::<f64>() / c as f64;
                let var = row.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / c as f64;
                let rs = 1.0 / (var + NORM_EPS).sqrt();
                for (d, x) in dst.iter_mut().zip(row) {
                    *d = (x - mean) * rs;
                }
                inv.push(rs);
            }
            (Tensor::new(a.shape().to_vec(), out).expect("ln shape"), inv)
        };
        self.unary(v, Op::LayerNorm(self.id, inv))
    }

    /// Per-row `x / sqrt(mean(x^2) + eps)` without a learned scale.
    pub fn rms_norm(&self) -> Var<'g> {
        let (v, inv) = {
            let nodes = self.graph.nodes();
            let a = &nodes[self.id].value;
            let (r, c) = a.dims2();
            let mut out = vec![0.0; a.numel()];
            let mut inv = Vec::with_capacity(r);
            for (row, dst) in a.data().chunks(c).zip(out.chunks_mut(c)) {
                let ms = row.iter().map(|x| x * x).sum::<f64>() / c as f64;
                let rs = 1.0 / (ms + NORM_EPS).sqrt();
                for (d, x) in dst.iter_mut().zip(row) {
                    *d = x * rs;
                }
                inv.push(rs);
            }
            (Tensor::new(a.shape().to_vec(), out).expect("rms shape"), inv)
        };
        self.unary(v, Op::RmsNorm(self.id, inv))
    }

    /// Row-wise softmax.
    pub fn softmax(&self) -> Var<'g> {
        let v = {
            let nodes = self.graph.nodes();
            let a = &nodes[self.id].value;
            let (_, c) = a.dims2();
            let mut out = a.data().to_vec();
            for row in out.chunks_mut(c) {
                let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let mut sum = 0.0;
                for x in row.iter_mut() {
                    *x = (*x - max).exp();
                    sum += *x;
                }
                row.iter_mut().for_each(|x| *x /= sum);
            }
            Tensor::new(a.shape().to_vec(), out).expect("softmax shape")
        };
        self.unary(v, Op::Softmax(self.id))
    }

    pub fn gelu(&self) -> Var<'g> {
        let v = self.map_value(gelu);
        self.unary(v, Op::Gelu(self.id))
    }

    pub fn silu(&self) -> Var<'g> {
        let v = self.map_value(|x| x * sigmoid(x));
        self.unary(v, Op::Silu(self.id))
    }

    pub fn square(&self) -> Var<'g> {
        let v = self.map_value(|x| x * x);
        self.unary(v, Op::Square(self.id))
    }

    pub fn sum(&self) -> Var<'g> {
        let s: f64 = self.graph.nodes()[self.id].value.data().iter().sum();
        self.unary(Tensor::scalar(s), Op::Sum(self.id))
    }

    pub fn mean(&self) -> Var<'g> {
        let n = self.graph.nodes()[self.id].value.numel();
        self.sum().scale(1.0 / n as f64)
    }

    /// Mean of squared entries.
    pub fn mean_square(&self) -> Var<'g> {
        self.square().mean()
    }

    /// Rotary position embedding applied independently to each `head_dim`
    /// column block; row `r` is rotated by `positions[r]`.
    pub fn rope(&self, positions: &[f64], head_dim: usize, base: f64) -> Result<Var<'g>> {
        let (rows, c) = self.dims2();
        if head_dim % 2 != 0 || c % head_dim != 0 {
            return Err(Error::contract(format!(
                "rope: width {c} not divisible into even heads of {head_dim}"
            )));
        }
        if positions.len() != rows {
            return Err(Error::shape("rope", &[rows, c], &[positions.len()]));
        }
        let half = head_dim / 2;
        let mut cos = Vec::with_capacity(rows * half);
        let mut sin = Vec::with_capacity(rows * half);
        for &p in positions {
            for i in 0..half {
                let theta = base.powf(-(2.0 * i as f64) / head_dim as f64);
                let (s, co) = (p * theta).sin_cos();
                cos.push(co);
                sin.push(s);
            }
        }
        let v = {
            let nodes = self.graph.nodes();
            let a = nodes[self.id].value.data();
            let mut out = a.to_vec();
            for r in 0..rows {
                for h in 0..c / head_dim {
                    for i in 0..half {
                        let (ia, ib) = (r * c + h * head_dim + i, r * c + h * head_dim + i + half);
                        let (co, si) = (cos[r * half + i], sin[r * half + i]);
                        out[ia] = a[ia] * co - a[ib] * si;
                        out[ib] = a[ia] * si + a[ib] * co;
                    }
                }
            }
            Tensor::from_matrix(rows, c, out)?
        };
        Ok(self.unary(
            v,
            Op::Rope {
                src: self.id,
                cos: Arc::new(cos),
                sin: Arc::new(sin),
                head_dim,
            },
        ))
    }

    /// Row `r` of the result is the sum of `self` (the table) at rows
    /// `indices[r * per_row .. (r + 1) * per_row]`.
    pub fn embedding_sum(&self, indices: &[usize], per_row: usize) -> Result<Var<'g>> {
        let v = {
            let nodes = self.graph.nodes();
            let table = &nodes[self.id].value;
            let (vocab, h) = table.dims2();
            if per_row == 0 || indices.len() % per_row != 0 {
                return Err(Error::contract("embedding_sum: ragged index list"));
            }
            if let Some(&bad) = indices.iter().find(|&&i| i >= vocab) {
                return Err(Error::contract(format!(
                    "embedding index {bad} out of range for table of {vocab} rows"
                )));
            }
            let rows = indices.len() / per_row;
            let mut out = vec![0.0; rows * h];
            for (r, idx) in indices.chunks(per_row).enumerate() {
                let dst = &mut out[r * h..(r + 1) * h];
                for &i in idx {
                    dst.iter_mut().zip(table.row(i)).for_each(|(d, s)| *d += s);
                }
            }
            Tensor::from_matrix(rows, h, out)?
        };
        Ok(self.unary(
            v,
            Op::EmbeddingSum {
                table: self.id,
                indices: Arc::new(indices.to_vec()),
                per_row,
            },
        ))
    }
}
