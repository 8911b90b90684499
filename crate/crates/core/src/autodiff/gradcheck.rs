use super::graph::{Graph, Var};
use super::tensor::Tensor;
use crate::error::Result;
use crate::exec::Exec;

/// `|a - n| / (|a| + |n| + 1e-12)`; NaN reports as infinity.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    let e = (analytic - numeric).abs() / (analytic.abs() + numeric.abs() + 1e-12);
    if e.is_nan() {
        f64::INFINITY
    } else {
        e
    }
}

/// Central differences of `f` at `x`, one coordinate at a time.
pub fn numeric_gradient<F>(f: &F, x: &Tensor, eps: f64, exec: Exec) -> Tensor
where
    F: Fn(&Tensor) -> f64 + Sync + Send,
{
    let g = exec.map(x.numel(), |i| {
        let mut xp = x.clone();
        xp.data_mut()[i] += eps;
        let mut xm = x.clone();
        xm.data_mut()[i] -= eps;
        (f(&xp) - f(&xm)) / (2.0 * eps)
    });
    Tensor::new(x.shape().to_vec(), g).expect("numeric gradient shape")
}

/// Reverse-mode gradient of a scalar graph function at `x`.
pub fn analytic_gradient<F>(f: &F, x: &Tensor) -> Result<(f64, Tensor)>
where
    F: for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>>,
{
    let g = Graph::new();
    let xv = g.param(x.clone());
    let loss = f(&g, xv)?;
    let grads = g.backward(loss)?;
    Ok((loss.item(), grads.get_or_zeros(xv, x)))
}

/// Largest coordinate-wise relative error between the reverse-mode gradient
/// of `f` and central differences with step `eps`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>> + Sync + Send,
{
    let (_, analytic) = analytic_gradient(&f, x)?;
    let eval = |t: &Tensor| -> f64 {
        let g = Graph::new();
        let v = g.constant(t.clone());
        f(&g, v).map(|l| l.item()).unwrap_or(f64::NAN)
    };
    let numeric = numeric_gradient(&eval, x, eps, Exec::Parallel);
    Ok(analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max))
}

/// Central-difference stencil used by [`finite_diff_check_params`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Stencil {
    /// `(f(x+h) − f(x−h)) / 2h`.
    Central(f64),
    /// `(8(f(x+h) − f(x−h)) − (f(x+2h) − f(x−2h))) / 12h`; truncation error
    /// `O(h⁴)`, which allows a larger step and so less cancellation.
    Central4(f64),
}

impl Stencil {
    pub fn derivative(&self, f: impl Fn(f64) -> f64) -> f64 {
        match *self {
            Stencil::Central(h) => (f(h) - f(-h)) / (2.0 * h),
            Stencil::Central4(h) => (8.0 * (f(h) - f(-h)) - (f(2.0 * h) - f(-2.0 * h))) / (12.0 * h),
        }
    }
}

/// Outcome of [`finite_diff_check_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCheck {
    /// Largest relative error per input tensor.
    pub per_tensor: Vec<f64>,
    /// `(tensor, coordinate, analytic, numeric)` at the worst coordinate.
    pub worst: (usize, usize, f64, f64),
    pub checked: usize,
    pub min_abs_grad: f64,
}

impl ParamCheck {
    pub fn max_rel_err(&self) -> f64 {
        self.per_tensor.iter().copied().fold(0.0, f64::max)
    }
}

/// [`finite_diff_check`] over several input tensors at once, with the
/// numeric side spread over `exec`. Also reports the smallest nonzero
/// analytic gradient magnitude, below which roundoff dominates any stencil.
pub fn finite_diff_check_params<F>(f: F, params: &[Tensor], stencil: Stencil, exec: Exec) -> Result<ParamCheck>
where
    F: for<'g> Fn(&'g Graph, &[Var<'g>]) -> Result<Var<'g>> + Sync + Send,
{
    let g = Graph::new();
    let vars: Vec<Var<'_>> = params.iter().map(|t| g.param(t.clone())).collect();
    let loss = f(&g, &vars)?;
    let grads = g.backward(loss)?;
    let analytic: Vec<Tensor> = vars.iter().zip(params).map(|(&v, t)| grads.get_or_zeros(v, t)).collect();
    drop(grads);

    let coords: Vec<(usize, usize)> = params
        .iter()
        .enumerate()
        .flat_map(|(p, t)| (0..t.numel()).map(move |i| (p, i)))
        .collect();
    let eval = |p: usize, i: usize, delta: f64| -> f64 {
        let g = Graph::new();
        let vars: Vec<Var<'_>> = params
            .iter()
            .enumerate()
            .map(|(q, t)| {
                if q == p {
                    let mut t = t.clone();
                    t.data_mut()[i] += delta;
                    g.constant(t)
                } else {
                    g.constant(t.clone())
                }
            })
            .collect();
        f(&g, &vars).map(|l| l.item()).unwrap_or(f64::NAN)
    };
    let numeric = exec.map(coords.len(), |k| {
        let (p, i) = coords[k];
        stencil.derivative(|d| eval(p, i, d))
    });
    let mut per_tensor = vec![0.0; params.len()];
    let mut worst = (0, 0, 0.0, 0.0);
    let mut worst_err = -1.0;
    for (&(p, i), &n) in coords.iter().zip(&numeric) {
        let a = analytic[p].data()[i];
        let e = relative_error(a, n);
        per_tensor[p] = f64::max(per_tensor[p], e);
        if e > worst_err {
            worst_err = e;
            worst = (p, i, a, n);
        }
    }
    let min_abs_grad = analytic
        .iter()
        .flat_map(|t| t.data().iter().map(|g| g.abs()))
        .filter(|&g| g > 0.0)
        .fold(f64::INFINITY, f64::min);
    Ok(ParamCheck {
        per_tensor,
        worst,
        checked: coords.len(),
        min_abs_grad,
    })
}
