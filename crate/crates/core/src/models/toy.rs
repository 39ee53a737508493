//! Conjugate Gaussian toy: unknown mean, likelihood variance `1 + 2/k^2` at
//! fidelity `k`, converging to unit variance.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::estimator::{FreshCursor, TargetSequence};

#[derive(Debug, Clone)]
pub struct ToyModel {
    data: Vec<f64>,
    sum: f64,
}

impl ToyModel {
    pub fn new(data: Vec<f64>) -> Self {
        let sum = data.iter().sum();
        Self { data, sum }
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Likelihood variance at fidelity `k`.
    pub fn variance(k: usize) -> f64 {
        1.0 + 2.0 / (k as f64 * k as f64)
    }

    fn log_lik_with_variance(&self, theta: f64, var: f64) -> f64 {
        let n = self.data.len() as f64;
        let ss: f64 = self.data.iter().map(|x| (x - theta) * (x - theta)).sum();
        -0.5 * n * (2.0 * PI * var).ln() - 0.5 * ss / var
    }

    /// Log-likelihood in the limit `k -> inf`.
    pub fn log_limit(&self, theta: &[f64]) -> f64 {
        self.log_lik_with_variance(theta[0], 1.0)
    }

    /// Mean and variance of the exact posterior.
    pub fn posterior(&self) -> (f64, f64) {
        let var = 1.0 / (1.0 + self.data.len() as f64);
        (var * self.sum, var)
    }

    /// Mean and variance of the posterior under the fidelity-`k` likelihood.
    pub fn posterior_at(&self, k: usize) -> (f64, f64) {
        let s2 = Self::variance(k);
        let var = 1.0 / (1.0 + self.data.len() as f64 / s2);
        (var * self.sum / s2, var)
    }

    /// Draws `theta0 ~ N(0, 1)` and `n` observations `N(theta0, 1)`.
    pub fn synthetic<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (f64, Vec<f64>) {
        let theta0: f64 = rng.sample(StandardNormal);
        let data = (0..n)
            .map(|_| theta0 + rng.sample::<f64, _>(StandardNormal))
            .collect();
        (theta0, data)
    }
}

impl TargetSequence for ToyModel {
    type Cursor = FreshCursor;

    fn dim(&self) -> usize {
        1
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        -0.5 * (2.0 * PI).ln() - 0.5 * theta[0] * theta[0]
    }

    fn start(&self, theta: &[f64], k: usize) -> Result<(FreshCursor, f64)> {
        let v = self.log_lik_with_variance(theta[0], Self::variance(k));
        Ok((FreshCursor::new(theta, k), v))
    }

    fn advance(&self, cursor: &mut FreshCursor) -> Result<f64> {
        cursor.level += 1;
        Ok(self.log_lik_with_variance(cursor.theta[0], Self::variance(cursor.level)))
    }

    /// Each evaluation at fidelity `k` is charged `k`, whether or not lower
    /// levels were visited first.
    fn level_cost(&self, k: usize) -> f64 {
        k as f64
    }

    fn fresh_cost(&self, k: usize) -> f64 {
        k as f64
    }
}
