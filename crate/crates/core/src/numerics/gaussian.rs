//! Dense Gaussian machinery: jittered Cholesky, sampling, conditioning.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const JITTER_SCALE: f64 = 1e-8;
const JITTER_DOUBLINGS: usize = 6;

/// Lower Cholesky factor, possibly of a jittered matrix.
#[derive(Debug, Clone)]
pub struct CholeskyFactor {
    l: DMatrix<f64>,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// Diagonal jitter that was added; zero if none was needed.
    pub jitter: f64,
}

impl CholeskyFactor {
    pub fn lower(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn dim(&self) -> usize {
        self.l.nrows()
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        self.chol.solve(b)
    }

    pub fn solve_matrix(&self, b: &DMatrix<f64>) -> DMatrix<f64> {
        self.chol.solve(b)
    }

    pub fn log_det(&self) -> f64 {
        2.0 * self.l.diagonal().iter().map(|d| d.ln()).sum::<f64>()
    }

    /// `L z`.
    pub fn mul_lower(&self, z: &[f64]) -> Vec<f64> {
        let n = self.dim();
        let mut out = vec![0.0; n];
        for i in 0..n {
            let mut s = 0.0;
            for j in 0..=i {
                s += self.l[(i, j)] * z[j];
            }
            out[i] = s;
        }
        out
    }
}

/// Cholesky factorization; on failure adds `1e-8 * mean(diag)` to the
/// diagonal and doubles it up to six times.
pub fn cholesky(sigma: &DMatrix<f64>) -> Result<CholeskyFactor> {
    if !sigma.is_square() {
        return Err(Error::DimensionMismatch {
            expected: sigma.nrows(),
            got: sigma.ncols(),
        });
    }
    let n = sigma.nrows();
    if let Some(chol) = sigma.clone().cholesky() {
        return Ok(CholeskyFactor {
            l: chol.l(),
            chol,
            jitter: 0.0,
        });
    }
    let mean_diag = if n == 0 { 0.0 } else { sigma.trace() / n as f64 };
    let mut jitter = JITTER_SCALE * mean_diag.abs().max(f64::MIN_POSITIVE);
    for _ in 0..=JITTER_DOUBLINGS {
        let mut m = sigma.clone();
        for i in 0..n {
            m[(i, i)] += jitter;
        }
        if let Some(chol) = m.cholesky() {
            return Ok(CholeskyFactor {
                l: chol.l(),
                chol,
                jitter,
            });
        }
        jitter *= 2.0;
    }
    Err(Error::NotPositiveDefinite {
        attempts: JITTER_DOUBLINGS + 2,
    })
}

/// Draw from `N(0, L L^T)`.
pub fn mvn_sample<R: Rng + ?Sized>(chol: &CholeskyFactor, rng: &mut R) -> Vec<f64> {
    let z: Vec<f64> = (0..chol.dim()).map(|_| rng.sample(StandardNormal)).collect();
    chol.mul_lower(&z)
}

/// Symmetric square root of a symmetric PSD matrix; negative eigenvalues
/// from round-off are clamped to zero.
pub fn psd_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let roots = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
    let q = &eig.eigenvectors;
    q * DMatrix::from_diagonal(&roots) * q.transpose()
}

/// Conditional of the trailing block given the leading `n_old` coordinates of
/// a zero-mean Gaussian with covariance `joint`. Returns `(mean, covariance)`.
pub fn gaussian_conditional(
    joint: &DMatrix<f64>,
    n_old: usize,
    f_old: &[f64],
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if f_old.len() != n_old {
        return Err(Error::DimensionMismatch {
            expected: n_old,
            got: f_old.len(),
        });
    }
    let n = joint.nrows();
    if n_old > n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: n_old,
        });
    }
    let s_oo = joint.view((0, 0), (n_old, n_old)).into_owned();
    let s_no = joint.view((n_old, 0), (n - n_old, n_old)).into_owned();
    let s_nn = joint.view((n_old, n_old), (n - n_old, n - n_old)).into_owned();
    let (map, cov) = conditional_operators(&s_oo, &s_no, &s_nn)?;
    let mean = &map * DVector::from_column_slice(f_old);
    Ok((mean, cov))
}

/// `(S_no S_oo^{-1}, S_nn - S_no S_oo^{-1} S_on)`, the latter symmetrized.
pub fn conditional_operators(
    s_oo: &DMatrix<f64>,
    s_no: &DMatrix<f64>,
    s_nn: &DMatrix<f64>,
) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    let chol = cholesky(s_oo)?;
    // S_oo^{-1} S_on, then transpose
    let map = chol.solve_matrix(&s_no.transpose()).transpose();
    let cov = s_nn - &map * s_no.transpose();
    let cov = (&cov + cov.transpose()) * 0.5;
    Ok((map, cov))
}
