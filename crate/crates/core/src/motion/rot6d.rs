use crate::error::{Error, Result};

/// Row-major 3×3 matrix.
pub type Mat3 = [[f64; 3]; 3];

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

pub(crate) fn norm(a: [f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn matmul3(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j] + a[i][2] * b[2][j];
        }
    }
    out
}

pub(crate) fn matvec3(a: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [dot(a[0], v), dot(a[1], v), dot(a[2], v)]
}

pub(crate) fn transpose3(a: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn columns(r6: &[f64]) -> ([f64; 3], [f64; 3]) {
    ([r6[0], r6[1], r6[2]], [r6[3], r6[4], r6[5]])
}

fn from_columns(b1: [f64; 3], b2: [f64; 3], b3: [f64; 3]) -> Mat3 {
    [
        [b1[0], b2[0], b3[0]],
        [b1[1], b2[1], b3[1]],
        [b1[2], b2[2], b3[2]],
    ]
}

const DEGENERATE: f64 = 1e-12;

/// Gram–Schmidt on the two stored columns. Degenerate input (a zero first
/// column, or a second column parallel to the first) is an error.
pub fn rot6d_to_matrix(r6: &[f64]) -> Result<Mat3> {
    if r6.len() != 6 {
        return Err(Error::contract(format!("rot6d needs 6 values, got {}", r6.len())));
    }
    let (a1, a2) = columns(r6);
    let n1 = norm(a1);
    if !(n1 > DEGENERATE) {
        return Err(Error::contract("rot6d: first column has zero norm"));
    }
    let b1 = a1.map(|v| v / n1);
    let c = dot(b1, a2);
    let u = [a2[0] - c * b1[0], a2[1] - c * b1[1], a2[2] - c * b1[2]];
    let nu = norm(u);
    if !(nu > DEGENERATE) {
        return Err(Error::contract("rot6d: columns are parallel or second column is zero"));
    }
    let b2 = u.map(|v| v / nu);
    Ok(from_columns(b1, b2, cross(b1, b2)))
}

/// Norm regularizer used on the differentiable path.
pub const REGULARIZER_EPS: f64 = 1e-8;

/// Gram–Schmidt with `norm + 1e-8` denominators; total on any input.
pub fn rot6d_to_matrix_regularized(r6: &[f64]) -> Mat3 {
    let (a1, a2) = columns(r6);
    let b1 = a1.map(|v| v / (norm(a1) + REGULARIZER_EPS));
    let c = dot(b1, a2);
    let u = [a2[0] - c * b1[0], a2[1] - c * b1[1], a2[2] - c * b1[2]];
    let b2 = u.map(|v| v / (norm(u) + REGULARIZER_EPS));
    from_columns(b1, b2, cross(b1, b2))
}

/// Vector-Jacobian product of [`rot6d_to_matrix_regularized`]: given the
/// gradient w.r.t. the output matrix, return the gradient w.r.t. the 6 inputs.
pub(crate) fn rot6d_regularized_vjp(r6: &[f64], grad: &Mat3) -> [f64; 6] {
    let (a1, a2) = columns(r6);
    let n1 = norm(a1);
    let d1 = n1 + REGULARIZER_EPS;
    let b1 = a1.map(|v| v / d1);
    let c = dot(b1, a2);
    let u = [a2[0] - c * b1[0], a2[1] - c * b1[1], a2[2] - c * b1[2]];
    let nu = norm(u);
    let du = nu + REGULARIZER_EPS;
    let b2 = u.map(|v| v / du);

    let col = |k: usize| [grad[0][k], grad[1][k], grad[2][k]];
    let (mut gb1, mut gb2, gb3) = (col(0), col(1), col(2));
    // b3 = b1 × b2
    let t1 = cross(b2, gb3);
    let t2 = cross(gb3, b1);
    for i in 0..3 {
        gb1[i] += t1[i];
        gb2[i] += t2[i];
    }
    // b2 = u / (|u| + eps)
    let ug = dot(u, gb2);
    let gu: [f64; 3] = std::array::from_fn(|i| {
        let radial = if nu > 0.0 { u[i] * ug / (du * du * nu) } else { 0.0 };
        gb2[i] / du - radial
    });
    // u = a2 - c b1, c = b1 · a2
    let mut ga2 = gu;
    let gc = -dot(gu, b1);
    for i in 0..3 {
        gb1[i] += -c * gu[i] + gc * a2[i];
        ga2[i] += gc * b1[i];
    }
    // b1 = a1 / (|a1| + eps)
    let ag = dot(a1, gb1);
    let ga1: [f64; 3] = std::array::from_fn(|i| {
        let radial = if n1 > 0.0 { a1[i] * ag / (d1 * d1 * n1) } else { 0.0 };
        gb1[i] / d1 - radial
    });
    [ga1[0], ga1[1], ga1[2], ga2[0], ga2[1], ga2[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn det(m: &Mat3) -> f64 {
        dot(m[0], cross(m[1], m[2]))
    }

    /// Rodrigues' formula, the independent oracle for known rotations.
    fn axis_angle(axis: [f64; 3], angle: f64) -> Mat3 {
        let n = norm(axis);
        let k = axis.map(|v| v / n);
        let (s, c) = angle.sin_cos();
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = k[i] * k[j] * (1.0 - c) + if i == j { c } else { 0.0 };
            }
        }
        m[0][1] -= k[2] * s;
        m[0][2] += k[1] * s;
        m[1][0] += k[2] * s;
        m[1][2] -= k[0] * s;
        m[2][0] -= k[1] * s;
        m[2][1] += k[0] * s;
        m
    }

    fn first_two_columns(m: &Mat3) -> [f64; 6] {
        [m[0][0], m[1][0], m[2][0], m[0][1], m[1][1], m[2][1]]
    }

    #[test]
    fn identity_from_canonical_columns() {
        let m = rot6d_to_matrix(&[1.0, 0.0, 0.0, 0.0, 1.0, 0.0]).unwrap();
        assert_eq!(m, [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);
    }

    #[test]
    fn recovers_quarter_turn_about_z() {
        let r = axis_angle([0.0, 0.0, 1.0], std::f64::consts::FRAC_PI_2);
        let m = rot6d_to_matrix(&first_two_columns(&r)).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert!((m[i][j] - r[i][j]).abs() < 1e-12);
            }
        }
        // x axis goes to y.
        let x = matvec3(&m, [1.0, 0.0, 0.0]);
        assert!((x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn outputs_are_special_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10_000 {
            let r6: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let m = rot6d_to_matrix(&r6).unwrap();
            let mtm = matmul3(&transpose3(&m), &m);
            for i in 0..3 {
                for j in 0..3 {
                    let e = if i == j { 1.0 } else { 0.0 };
                    assert!((mtm[i][j] - e).abs() < 1e-10);
                }
            }
            assert!((det(&m) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn degenerate_columns_are_rejected() {
        assert!(rot6d_to_matrix(&[0.0; 6]).is_err());
        assert!(rot6d_to_matrix(&[1.0, 2.0, 3.0, 2.0, 4.0, 6.0]).is_err());
        // The regularized path stays finite on the same inputs.
        let m = rot6d_to_matrix_regularized(&[0.0; 6]);
        assert!(m.iter().flatten().all(|v| v.is_finite()));
    }

    #[test]
    fn vjp_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let r6: Vec<f64> = (0..6).map(|_| rng.random_range(-2.0..2.0)).collect();
            let g: Mat3 = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
            let f = |x: &[f64]| -> f64 {
                let m = rot6d_to_matrix_regularized(x);
                (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| m[i][j] * g[i][j]).sum()
            };
            let analytic = rot6d_regularized_vjp(&r6, &g);
            for k in 0..6 {
                let mut p = r6.clone();
                let mut m = r6.clone();
                p[k] += 1e-6;
                m[k] -= 1e-6;
                let num = (f(&p) - f(&m)) / 2e-6;
                assert!((num - analytic[k]).abs() < 1e-6 * (1.0 + num.abs()), "{k}: {num} vs {}", analytic[k]);
            }
        }
    }
}
