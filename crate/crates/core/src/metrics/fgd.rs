use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::JointPositions;

/// Mean and covariance of a feature set.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianFit {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl GaussianFit {
    /// Sample mean and unbiased (`N − 1`) covariance of the rows.
    pub fn from_features(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if n < 2 {
            return Err(Error::contract(format!("need at least 2 feature rows, got {n}")));
        }
        let f = rows[0].len();
        if f == 0 || rows.iter().any(|r| r.len() != f) {
            return Err(Error::contract("feature rows must share a positive width"));
        }
        let x = DMatrix::from_fn(n, f, |i, j| rows[i][j]);
        let mean = DVector::from_fn(f, |j, _| x.column(j).sum() / n as f64);
        let mut c = x;
        for j in 0..f {
            let m = mean[j];
            c.column_mut(j).iter_mut().for_each(|v| *v -= m);
        }
        let mut cov = c.transpose() * &c / (n as f64 - 1.0);
        symmetrize(&mut cov);
        Ok(GaussianFit { mean, cov })
    }

    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let f = mean.len();
        if f == 0 || cov.len() != f * f {
            return Err(Error::contract("covariance must be F×F for an F-dim mean"));
        }
        let cov = DMatrix::from_row_slice(f, f, &cov);
        if (&cov - cov.transpose()).amax() > 1e-10 {
            return Err(Error::contract("covariance is not symmetric"));
        }
        Ok(GaussianFit { mean: DVector::from_vec(mean), cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

fn symmetrize(m: &mut DMatrix<f64>) {
    let t = m.transpose();
    *m += t;
    *m *= 0.5;
}

/// Symmetric PSD square root. Eigenvalues above `−tol` are clamped to 0;
/// anything lower is a numerical error.
pub fn psd_sqrt(m: &DMatrix<f64>, tol: f64) -> Result<DMatrix<f64>> {
    let mut s = m.clone();
    symmetrize(&mut s);
    let e = SymmetricEigen::new(s);
    if let Some(l) = e.eigenvalues.iter().find(|&&l| l < -tol) {
        return Err(Error::Numerical(format!("matrix is not PSD (eigenvalue {l:e})")));
    }
    let d = DMatrix::from_diagonal(&e.eigenvalues.map(|l| l.max(0.0).sqrt()));
    Ok(&e.eigenvectors * d * e.eigenvectors.transpose())
}

fn psd_tol(m: &DMatrix<f64>) -> f64 {
    1e-10 * m.amax().max(1.0)
}

/// `‖μ_r − μ_g‖² + Tr(Σ_r + Σ_g − 2(Σ_r Σ_g)^{1/2})`. The trace of the
/// product root is taken as `Tr((Σ_r^{1/2} Σ_g Σ_r^{1/2})^{1/2})`, which has
/// the same eigenvalues and stays symmetric.
pub fn frechet_distance(a: &GaussianFit, b: &GaussianFit) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::contract(format!("feature widths {} and {} differ", a.dim(), b.dim())));
    }
    let ra = psd_sqrt(&a.cov, psd_tol(&a.cov))?;
    let inner = &ra * &b.cov * &ra;
    let cross = SymmetricEigen::new({
        let mut s = inner.clone();
        symmetrize(&mut s);
        s
    });
    let tol = psd_tol(&inner);
    if let Some(l) = cross.eigenvalues.iter().find(|&&l| l < -tol) {
        return Err(Error::Numerical(format!("Σ_r Σ_g has eigenvalue {l:e}")));
    }
    let tr_root: f64 = cross.eigenvalues.iter().map(|l| l.max(0.0).sqrt()).sum();
    let d = (&a.mean - &b.mean).norm_squared() + a.cov.trace() + b.cov.trace() - 2.0 * tr_root;
    Ok(d.max(0.0))
}

/// Fréchet distance between the Gaussian fits of two feature sets.
pub fn fgd(real: &[Vec<f64>], generated: &[Vec<f64>]) -> Result<f64> {
    frechet_distance(&GaussianFit::from_features(real)?, &GaussianFit::from_features(generated)?)
}

/// Maps joint positions to feature rows.
pub trait FeatureEncoder {
    fn encode(&self, positions: &JointPositions) -> Result<Vec<Vec<f64>>>;
}

/// Per-window mean and standard deviation of every joint coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WindowStatsEncoder {
    pub window: usize,
    pub hop: usize,
}

impl Default for WindowStatsEncoder {
    fn default() -> Self {
        WindowStatsEncoder { window: 30, hop: 10 }
    }
}

impl FeatureEncoder for WindowStatsEncoder {
    fn encode(&self, pos: &JointPositions) -> Result<Vec<Vec<f64>>> {
        if self.window == 0 || self.hop == 0 {
            return Err(Error::contract("encoder window and hop must be positive"));
        }
        let w = self.window.min(pos.num_frames);
        let width = pos.num_joints * 3;
        let starts = (0..=pos.num_frames - w).step_by(self.hop);
        Ok(starts
            .map(|s| {
                let mut mean = vec![0.0; width];
                for t in s..s + w {
                    mean.iter_mut().zip(pos.frame(t)).for_each(|(m, v)| *m += v / w as f64);
                }
                let mut var = vec![0.0; width];
                for t in s..s + w {
                    var.iter_mut()
                        .zip(pos.frame(t).iter().zip(&mean))
                        .for_each(|(acc, (v, m))| *acc += (v - m).powi(2) / w as f64);
                }
                mean.extend(var.into_iter().map(f64::sqrt));
                mean
            })
            .collect())
    }
}
