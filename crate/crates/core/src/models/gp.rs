//! GP regression with an unknown squared-exponential lengthscale. Fidelity
//! `k` replaces the solve in the quadratic form by `k + offset` conjugate
//! gradient iterations; the log-determinant is exact at every fidelity.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimator::TargetSequence;
use crate::numerics::{cg_advance, cholesky, mvn_sample, se_gram, CgState, Preconditioner};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CgPreconditioning {
    #[default]
    None,
    Jacobi,
}

#[derive(Debug, Clone)]
pub struct GpModel {
    x: Vec<f64>,
    y: Vec<f64>,
    noise_var: f64,
    kernel_var: f64,
    /// Mean and variance of the log-lengthscale prior.
    prior_log_mean: f64,
    prior_log_var: f64,
    cg_offset: usize,
    preconditioning: CgPreconditioning,
}

/// CG state for one lengthscale.
#[derive(Debug, Clone)]
pub struct GpCursor {
    cov: DMatrix<f64>,
    cg: CgState,
    preconditioner: Preconditioner,
    /// `-0.5 * log|2 pi C|`.
    log_norm: f64,
}

impl GpModel {
    pub const PRIOR_LOG_MEAN: f64 = 3.8;
    pub const PRIOR_LOG_VAR: f64 = 0.03;

    pub fn new(x: Vec<f64>, y: Vec<f64>, noise_var: f64, cg_offset: usize) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch {
                expected: x.len(),
                got: y.len(),
            });
        }
        if x.is_empty() || !(noise_var > 0.0) {
            return Err(Error::InvalidArgument(
                "GP model needs data and a positive noise variance".into(),
            ));
        }
        Ok(Self {
            x,
            y,
            noise_var,
            kernel_var: 1.0,
            prior_log_mean: Self::PRIOR_LOG_MEAN,
            prior_log_var: Self::PRIOR_LOG_VAR,
            cg_offset,
            preconditioning: CgPreconditioning::None,
        })
    }

    pub fn with_preconditioning(mut self, preconditioning: CgPreconditioning) -> Self {
        self.preconditioning = preconditioning;
        self
    }

    pub fn with_prior(mut self, log_mean: f64, log_var: f64) -> Self {
        self.prior_log_mean = log_mean;
        self.prior_log_var = log_var;
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn cg_offset(&self) -> usize {
        self.cg_offset
    }

    /// `Sigma_theta + noise * I`.
    pub fn covariance(&self, lengthscale: f64) -> DMatrix<f64> {
        let mut c = se_gram(&self.x, lengthscale, self.kernel_var);
        for i in 0..self.x.len() {
            c[(i, i)] += self.noise_var;
        }
        c
    }

    /// Log marginal likelihood with a direct solve.
    pub fn log_lik_exact(&self, lengthscale: f64) -> Result<f64> {
        let chol = cholesky(&self.covariance(lengthscale))?;
        let y = DVector::from_column_slice(&self.y);
        let alpha = chol.solve(&y);
        let n = self.x.len() as f64;
        Ok(-0.5 * (n * (2.0 * PI).ln() + chol.log_det()) - 0.5 * y.dot(&alpha))
    }

    /// Inputs uniform on `[0, span]`, outputs from the GP prior plus noise.
    pub fn synthetic<R: Rng + ?Sized>(
        n: usize,
        span: f64,
        lengthscale: f64,
        noise_var: f64,
        rng: &mut R,
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let x: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * span).collect();
        let f = mvn_sample(&cholesky(&se_gram(&x, lengthscale, 1.0))?, rng);
        let noise_sd = noise_var.sqrt();
        let y = f
            .iter()
            .map(|fi| fi + noise_sd * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Ok((x, y))
    }

    fn quadratic_level(&self, cursor: &GpCursor) -> f64 {
        let yz: f64 = self.y.iter().zip(&cursor.cg.z).map(|(a, b)| a * b).sum();
        cursor.log_norm - 0.5 * yz
    }

    fn iterate(cursor: &mut GpCursor, m: usize) -> Result<()> {
        let cov = &cursor.cov;
        let mut apply = |v: &[f64], out: &mut [f64]| {
            let r = cov * DVector::from_column_slice(v);
            out.copy_from_slice(r.as_slice());
        };
        cg_advance(&mut cursor.cg, &mut apply, &cursor.preconditioner, m)
    }
}

impl TargetSequence for GpModel {
    type Cursor = GpCursor;

    fn dim(&self) -> usize {
        1
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let l = theta[0];
        if !(l > 0.0) {
            return f64::NEG_INFINITY;
        }
        let z = l.ln() - self.prior_log_mean;
        -l.ln() - 0.5 * (2.0 * PI * self.prior_log_var).ln() - 0.5 * z * z / self.prior_log_var
    }

    fn start(&self, theta: &[f64], k: usize) -> Result<(GpCursor, f64)> {
        let l = theta[0];
        if !(l > 0.0) || !l.is_finite() {
            return Err(Error::InvalidArgument(format!("lengthscale must be positive, got {l}")));
        }
        let cov = self.covariance(l);
        let chol = cholesky(&cov)?;
        let n = self.x.len() as f64;
        let preconditioner = match self.preconditioning {
            CgPreconditioning::None => Preconditioner::None,
            CgPreconditioning::Jacobi => Preconditioner::jacobi_from_diagonal(cov.diagonal().as_slice())?,
        };
        let mut cursor = GpCursor {
            cg: CgState::new(&self.y, &preconditioner),
            preconditioner,
            cov,
            log_norm: -0.5 * (n * (2.0 * PI).ln() + chol.log_det()),
        };
        Self::iterate(&mut cursor, k + self.cg_offset)?;
        let v = self.quadratic_level(&cursor);
        Ok((cursor, v))
    }

    fn advance(&self, cursor: &mut GpCursor) -> Result<f64> {
        Self::iterate(cursor, 1)?;
        Ok(self.quadratic_level(cursor))
    }

    /// One CG iteration per level; the first level also pays for the offset.
    fn level_cost(&self, k: usize) -> f64 {
        if k == 1 {
            (1 + self.cg_offset) as f64
        } else {
            1.0
        }
    }

    fn fresh_cost(&self, k: usize) -> f64 {
        (k + self.cg_offset) as f64
    }
}
