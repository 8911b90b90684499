use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::error::Result;

fn rng() -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(7)
}

fn mat(r: usize, c: usize, v: &[f64]) -> Tensor {
    Tensor::from_matrix(r, c, v.to_vec()).unwrap()
}

#[test]
fn matmul_of_ones() {
    let g = Graph::new();
    let a = g.constant(Tensor::ones(vec![2, 3]));
    let b = g.constant(Tensor::ones(vec![3, 2]));
    let c = a.matmul(&b).unwrap().value();
    assert_eq!(c.shape(), &[2, 2]);
    assert!(c.data().iter().all(|&v| v == 3.0));
}

#[test]
fn matmul_shape_error_names_both_shapes() {
    let g = Graph::new();
    let a = g.constant(Tensor::ones(vec![2, 3]));
    let err = a.matmul(&a).unwrap_err().to_string();
    assert!(err.contains("matmul") && err.contains("[2, 3]"), "{err}");
}

#[test]
fn softmax_of_zeros_is_uniform() {
    let g = Graph::new();
    let s = g.constant(Tensor::zeros(vec![1, 3])).softmax().value();
    for &v in s.data() {
        assert!((v - 1.0 / 3.0).abs() < 1e-15);
    }
}

#[test]
fn layer_norm_of_constant_is_zero() {
    let g = Graph::new();
    let y = g.constant(Tensor::full(vec![2, 5], 4.2)).layer_norm().value();
    assert!(y.data().iter().all(|&v| v == 0.0));
}

#[test]
fn backward_of_sum_of_squares() {
    let g = Graph::new();
    let x = g.param(Tensor::new(vec![2], vec![1.0, 2.0]).unwrap());
    let loss = x.square().sum();
    let grads = g.backward(loss).unwrap();
    assert_eq!(grads.get(x).unwrap().data(), &[2.0, 4.0]);
}

#[test]
fn backward_of_matmul_sum() {
    let g = Graph::new();
    let a = g.param(mat(2, 2, &[1.0, 2.0, 3.0, 4.0]));
    let b = g.param(mat(2, 2, &[5.0, 6.0, 7.0, 8.0]));
    let loss = a.matmul(&b).unwrap().sum();
    let grads = g.backward(loss).unwrap();
    // d/dA sum(AB) = 1 Bᵀ: row i of the gradient holds the row sums of B.
    assert_eq!(grads.get(a).unwrap().data(), &[11.0, 15.0, 11.0, 15.0]);
    assert_eq!(grads.get(b).unwrap().data(), &[4.0, 4.0, 6.0, 6.0]);
}

#[test]
fn non_scalar_loss_is_rejected() {
    let g = Graph::new();
    let x = g.param(Tensor::ones(vec![2]));
    assert!(g.backward(x.square()).is_err());
}

#[test]
fn fan_out_accumulates() {
    let g = Graph::new();
    let x = g.param(Tensor::scalar(3.0));
    let y = x.mul(&x).unwrap().add(&x).unwrap().sum();
    let grads = g.backward(y).unwrap();
    assert_eq!(grads.get(x).unwrap().item(), 7.0);
}

#[test]
fn finite_diff_of_linear_is_exact() {
    let x = Tensor::randn(vec![3, 4], 1.0, &mut rng());
    let err = finite_diff_check(|_, v| Ok(v.sum()), &x, 1e-5).unwrap();
    assert!(err < 1e-9, "{err}");
}

#[test]
fn finite_diff_reports_nan_as_failure() {
    let x = Tensor::full(vec![2], -1.0);
    let err = finite_diff_check(
        |g, v| {
            let t = v.value().map(f64::sqrt);
            Ok(g.constant(t).sum().add(&v.sum())?)
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err.is_infinite());
}

/// Check one primitive through a random projection so every output
/// coordinate contributes with a distinct weight.
fn check_primitive<F>(name: &str, shape: &[usize], f: F)
where
    F: for<'g> Fn(&'g Graph, Var<'g>) -> Result<Var<'g>> + Sync + Send,
{
    let mut r = rng();
    let x = Tensor::randn(shape.to_vec(), 1.0, &mut r);
    let probe_shape = {
        let g = Graph::new();
        f(&g, g.constant(x.clone())).unwrap().shape()
    };
    let w = Tensor::randn(probe_shape, 1.0, &mut r);
    let err = finite_diff_check(
        |g, v| {
            let y = f(g, v)?;
            let wv = g.constant(w.clone());
            Ok(y.mul(&wv)?.sum())
        },
        &x,
        1e-5,
    )
    .unwrap();
    assert!(err < 1e-4, "{name}: relative error {err}");
}

fn c(g: &Graph, shape: Vec<usize>, seed: u64) -> Var<'_> {
    g.constant(Tensor::randn(shape, 1.0, &mut ChaCha8Rng::seed_from_u64(seed)))
}

#[test]
fn gradient_check_every_primitive() {
    check_primitive("add", &[3, 4], |g, x| x.add(&c(g, vec![3, 4], 1)));
    check_primitive("sub", &[3, 4], |g, x| c(g, vec![3, 4], 1).sub(&x));
    check_primitive("mul", &[3, 4], |g, x| x.mul(&c(g, vec![3, 4], 1)));
    check_primitive("mul_self", &[3, 4], |_, x| x.mul(&x));
    check_primitive("add_row(a)", &[3, 4], |g, x| x.add_row(&c(g, vec![4], 2)));
    check_primitive("add_row(row)", &[4], |g, x| c(g, vec![3, 4], 2).add_row(&x));
    check_primitive("mul_row(a)", &[3, 4], |g, x| x.mul_row(&c(g, vec![4], 2)));
    check_primitive("mul_row(row)", &[4], |g, x| c(g, vec![3, 4], 2).mul_row(&x));
    check_primitive("add_scalar", &[3, 4], |_, x| Ok(x.add_scalar(2.5)));
    check_primitive("scale", &[3, 4], |_, x| Ok(x.scale(-1.5)));
    check_primitive("scale_rows", &[3, 4], |_, x| x.scale_rows(&[0.5, 0.0, 2.0]));
    check_primitive("matmul(a)", &[3, 4], |g, x| x.matmul(&c(g, vec![4, 5], 3)));
    check_primitive("matmul(b)", &[4, 5], |g, x| c(g, vec![3, 4], 3).matmul(&x));
    check_primitive("transpose", &[3, 4], |_, x| Ok(x.transpose()));
    check_primitive("concat_rows", &[2, 4], |g, x| {
        Var::concat_rows(&[c(g, vec![1, 4], 4), x, x])
    });
    check_primitive("concat_cols", &[3, 2], |g, x| {
        Var::concat_cols(&[x, c(g, vec![3, 3], 4), x])
    });
    check_primitive("slice_rows", &[5, 3], |_, x| x.slice_rows(1, 3));
    check_primitive("slice_cols", &[3, 5], |_, x| x.slice_cols(2, 2));
    check_primitive("layer_norm", &[3, 6], |_, x| Ok(x.layer_norm()));
    check_primitive("rms_norm", &[3, 6], |_, x| Ok(x.rms_norm()));
    check_primitive("softmax", &[3, 6], |_, x| Ok(x.softmax()));
    check_primitive("gelu", &[3, 6], |_, x| Ok(x.gelu()));
    check_primitive("silu", &[3, 6], |_, x| Ok(x.silu()));
    check_primitive("square", &[3, 6], |_, x| Ok(x.square()));
    check_primitive("mean", &[3, 6], |_, x| Ok(x.mean()));
    check_primitive("rope", &[3, 8], |_, x| x.rope(&[0.0, 1.0, 7.0], 4, 10000.0));
    check_primitive("embedding_sum", &[6, 3], |_, x| x.embedding_sum(&[0, 5, 2, 2, 1, 4], 2));
}

#[test]
fn rope_preserves_norm_and_is_identity_at_zero() {
    let x = Tensor::randn(vec![2, 8], 1.0, &mut rng());
    let g = Graph::new();
    let v = g.constant(x.clone());
    let at0 = v.rope(&[0.0, 0.0], 4, 10000.0).unwrap().value();
    assert!(at0.max_abs_diff(&x) < 1e-15);
    let y = v.rope(&[3.0, 11.0], 4, 10000.0).unwrap().value();
    for r in 0..2 {
        let n0: f64 = x.row(r).iter().map(|v| v * v).sum();
        let n1: f64 = y.row(r).iter().map(|v| v * v).sum();
        assert!((n0 - n1).abs() < 1e-12);
    }
}

fn f<'g>(_g: &'g Graph, v: Var<'g>) -> Result<Var<'g>> {
    Ok(v.gelu().square().sum())
}

fn h<'g>(_g: &'g Graph, v: Var<'g>) -> Result<Var<'g>> {
    Ok(v.softmax().layer_norm().sum())
}

fn combo<'g>(g: &'g Graph, v: Var<'g>, a: f64, b: f64) -> Result<Var<'g>> {
    let fv = f(g, v)?.scale(a);
    let hv = h(g, v)?.scale(b);
    fv.add(&hv)
}

#[test]
fn backward_is_linear() {
    let x = Tensor::randn(vec![3, 4], 1.0, &mut rng());
    let (a, b) = (2.5, -0.75);
    let (_, gf) = analytic_gradient(&f, &x).unwrap();
    let (_, gh) = analytic_gradient(&h, &x).unwrap();
    let (_, gc) = analytic_gradient(
        &|g: &Graph, v: Var<'_>| -> Result<Var<'_>> { combo(g, v, a, b) },
        &x,
    )
    .unwrap();
    for i in 0..x.numel() {
        let expect = a * gf.data()[i] + b * gh.data()[i];
        assert!((gc.data()[i] - expect).abs() < 1e-12);
    }
}

#[test]
fn forward_and_backward_are_deterministic() {
    let x = Tensor::randn(vec![4, 8], 1.0, &mut rng());
    let run = || {
        analytic_gradient(
            &|_g: &Graph, v: Var<'_>| -> Result<Var<'_>> {
                let a = v.matmul(&v.transpose())?.softmax();
                Ok(a.matmul(&v)?.rms_norm().gelu().sum())
            },
            &x,
        )
        .unwrap()
    };
    let (l1, g1) = run();
    let (l2, g2) = run();
    assert_eq!(l1.to_bits(), l2.to_bits());
    assert!(g1.data().iter().zip(g2.data()).all(|(a, b)| a.to_bits() == b.to_bits()));
}

#[test]
fn constants_receive_no_gradient() {
    let g = Graph::new();
    let x = g.param(Tensor::ones(vec![2]));
    let c = g.constant(Tensor::ones(vec![2]));
    let grads = g.backward(x.mul(&c).unwrap().sum()).unwrap();
    assert!(grads.get(c).is_none());
    assert!(grads.get(x).is_some());
}

mod props {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn softmax_rows_sum_to_one(v in proptest::collection::vec(-30.0f64..30.0, 12)) {
            let g = Graph::new();
            let s = g.constant(mat(3, 4, &v)).softmax().value();
            for r in 0..3 {
                let sum: f64 = s.row(r).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
            }
        }

        #[test]
        fn norms_stay_finite(v in proptest::collection::vec(-10.0f64..10.0, 12)) {
            let g = Graph::new();
            let x = g.constant(mat(2, 6, &v));
            prop_assert!(x.layer_norm().value().is_finite());
            prop_assert!(x.rms_norm().value().is_finite());
        }
    }
}
