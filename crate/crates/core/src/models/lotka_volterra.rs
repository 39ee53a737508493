//! Predator-prey parameter inference. The state is the log-parameter vector
//! `(log alpha, log beta, log gamma, log delta)` shifted by the prior mean,
//! so the prior is a centred Gaussian; fidelity `k` solves the ODE with step
//! `1 / (10 k + 50)`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::estimator::{FreshCursor, TargetSequence};
use crate::numerics::{ode_solve, OdeMethod, OdeOptions};

pub const PRIOR_MEAN: [f64; 4] = [0.0, -2.0, 0.0, -3.0];
pub const PRIOR_VAR: f64 = 0.1;
pub const STEP_SCALE: f64 = 10.0;
pub const STEP_OFFSET: f64 = 50.0;

/// `du/dt = (alpha - beta v) u`, `dv/dt = (-gamma + delta u) v`.
pub fn lv_rhs(params: [f64; 4], z: &[f64], dz: &mut [f64]) {
    let [a, b, g, d] = params;
    dz[0] = (a - b * z[1]) * z[0];
    dz[1] = (-g + d * z[0]) * z[1];
}

/// ODE step size at fidelity `k`.
pub fn step_size(k: usize) -> f64 {
    1.0 / (STEP_SCALE * k as f64 + STEP_OFFSET)
}

/// Populations at `times` (after `t0`), or `None` if the solve blew up.
pub fn lv_solve(
    params: [f64; 4],
    z0: [f64; 2],
    t0: f64,
    times: &[f64],
    dt: f64,
    method: OdeMethod,
) -> Result<Option<Vec<Vec<f64>>>> {
    let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| lv_rhs(params, z, dz);
    match ode_solve(rhs, &z0, t0, times, OdeOptions::new(dt, method)) {
        Ok(sol) => Ok(Some(sol.states)),
        Err(Error::OdeBlowUp { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct LvModel {
    t0: f64,
    z0: [f64; 2],
    times: Vec<f64>,
    /// Observed `(prey, predator)` at each time.
    obs: Vec<[f64; 2]>,
    sigma: f64,
    method: OdeMethod,
}

impl LvModel {
    pub fn new(
        t0: f64,
        z0: [f64; 2],
        times: Vec<f64>,
        obs: Vec<[f64; 2]>,
        sigma: f64,
        method: OdeMethod,
    ) -> Result<Self> {
        if times.len() != obs.len() {
            return Err(Error::DimensionMismatch {
                expected: times.len(),
                got: obs.len(),
            });
        }
        if times.is_empty() || times[0] <= t0 || times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument(
                "observation times must be increasing and after the initial time".into(),
            ));
        }
        if obs.iter().flatten().any(|y| !(*y > 0.0)) || z0.iter().any(|z| !(*z > 0.0)) {
            return Err(Error::InvalidArgument("populations must be positive".into()));
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidArgument(format!("noise scale must be positive, got {sigma}")));
        }
        Ok(Self {
            t0,
            z0,
            times,
            obs,
            sigma,
            method,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn observations(&self) -> &[[f64; 2]] {
        &self.obs
    }

    /// Log-parameters for a centred state.
    pub fn log_params(state: &[f64]) -> [f64; 4] {
        std::array::from_fn(|i| state[i] + PRIOR_MEAN[i])
    }

    /// Log-likelihood of the observations given trajectories `z`, `-inf`
    /// when any population is not positive.
    pub fn log_lik_of(&self, z: &[Vec<f64>]) -> f64 {
        let s2 = self.sigma * self.sigma;
        let norm = -0.5 * (2.0 * PI * s2).ln();
        let mut total = 0.0;
        for (zn, yn) in z.iter().zip(&self.obs) {
            for j in 0..2 {
                if !(zn[j] > 0.0) {
                    return f64::NEG_INFINITY;
                }
                let r = yn[j].ln() - zn[j].ln();
                total += norm - yn[j].ln() - 0.5 * r * r / s2;
            }
        }
        total
    }

    /// Log-likelihood with an explicit step size and solver.
    pub fn log_lik_with(&self, state: &[f64], dt: f64, method: OdeMethod) -> Result<f64> {
        let params = Self::log_params(state).map(f64::exp);
        Ok(match lv_solve(params, self.z0, self.t0, &self.times, dt, method)? {
            Some(z) => self.log_lik_of(&z),
            None => f64::NEG_INFINITY,
        })
    }

    /// Observations `z(t) exp(noise * eps)` from a fine RK4 solve.
    pub fn synthetic<R: Rng + ?Sized>(
        params: [f64; 4],
        z0: [f64; 2],
        times: &[f64],
        noise_sd: f64,
        rng: &mut R,
    ) -> Result<Vec<[f64; 2]>> {
        let z = lv_solve(params, z0, 0.0, times, 1e-4, OdeMethod::Rk4)?
            .ok_or_else(|| Error::InvalidArgument("synthetic trajectory blew up".into()))?;
        Ok(z.iter()
            .map(|zn| {
                std::array::from_fn(|j| {
                    zn[j] * (noise_sd * rng.sample::<f64, _>(StandardNormal)).exp()
                })
            })
            .collect())
    }

    fn steps(&self, k: usize) -> f64 {
        let dt = step_size(k);
        let mut t = self.t0;
        let mut n = 0.0;
        for &target in &self.times {
            n += ((target - t) / dt * (1.0 - 1e-12)).ceil().max(1.0);
            t = target;
        }
        n
    }
}

impl TargetSequence for LvModel {
    type Cursor = FreshCursor;

    fn dim(&self) -> usize {
        4
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        theta
            .iter()
            .map(|x| -0.5 * (2.0 * PI * PRIOR_VAR).ln() - 0.5 * x * x / PRIOR_VAR)
            .sum()
    }

    fn start(&self, theta: &[f64], k: usize) -> Result<(FreshCursor, f64)> {
        let v = self.log_lik_with(theta, step_size(k), self.method)?;
        Ok((FreshCursor::new(theta, k), v))
    }

    fn advance(&self, cursor: &mut FreshCursor) -> Result<f64> {
        cursor.level += 1;
        self.log_lik_with(&cursor.theta, step_size(cursor.level), self.method)
    }

    /// Solver steps; every level is a separate solve.
    fn level_cost(&self, k: usize) -> f64 {
        self.steps(k)
    }

    fn fresh_cost(&self, k: usize) -> f64 {
        self.steps(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TRUTH: [f64; 4] = [1.5, 1.0, 3.0, 1.0];

    fn times() -> Vec<f64> {
        (1..=50).map(|n| 0.2 * n as f64).collect()
    }

    fn truth_state() -> Vec<f64> {
        TRUTH.iter().zip(PRIOR_MEAN).map(|(p, m)| p.ln() - m).collect()
    }

    fn model(method: OdeMethod) -> LvModel {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let obs = LvModel::synthetic(TRUTH, [1.0, 1.0], &times(), 0.8, &mut rng).unwrap();
        LvModel::new(0.0, [1.0, 1.0], times(), obs, 0.25, method).unwrap()
    }

    #[test]
    fn step_sizes() {
        assert!((step_size(1) - 1.0 / 60.0).abs() < 1e-15);
        assert_eq!(step_size(5), 0.01);
    }

    /// With no interaction both species evolve exponentially.
    #[test]
    fn decoupled_system_matches_exponentials() {
        let times: [f64; 3] = [0.5, 1.0, 1.5];
        let (a, g) = (0.7f64, 0.4f64);
        let obs: Vec<[f64; 2]> = times.iter().map(|t| [2.0 * (a * t).exp(), 3.0 * (-g * t).exp()]).collect();
        let m = LvModel::new(0.0, [2.0, 3.0], times.to_vec(), obs, 0.25, OdeMethod::Rk4).unwrap();
        let z = lv_solve([a, 0.0, g, 0.0], [2.0, 3.0], 0.0, &times, step_size(20), OdeMethod::Rk4)
            .unwrap()
            .unwrap();
        for (zn, t) in z.iter().zip(times) {
            assert!((zn[0] / (2.0 * (a * t).exp()) - 1.0).abs() < 1e-10);
            assert!((zn[1] / (3.0 * (-g * t).exp()) - 1.0).abs() < 1e-10);
        }
        // exact trajectories leave only the normalising terms
        let expect: f64 = m
            .observations()
            .iter()
            .flatten()
            .map(|y| -0.5 * (2.0 * PI * 0.0625).ln() - y.ln())
            .sum();
        assert!((m.log_lik_of(&z) - expect).abs() < 1e-8);
    }

    #[test]
    fn euler_and_rk4_agree_as_k_grows() {
        let euler = model(OdeMethod::Euler);
        let rk4 = model(OdeMethod::Rk4);
        let state = truth_state();
        let gap = |k| {
            let a = euler.log_level(&state, k).unwrap();
            let b = rk4.log_level(&state, k).unwrap();
            ((a - b) / b).abs()
        };
        let g: Vec<f64> = [1, 5, 20].into_iter().map(gap).collect();
        assert!(g[0] > g[1] && g[1] > g[2], "{g:?}");
    }

    #[test]
    fn nonpositive_or_exploding_solutions_are_rejected() {
        let m = model(OdeMethod::Euler);
        let blown = [5.0, -5.0, 5.0, 5.0];
        assert_eq!(m.log_level(&blown, 1).unwrap(), f64::NEG_INFINITY);
        assert_eq!(m.log_lik_of(&vec![vec![1.0, -0.1]; 50]), f64::NEG_INFINITY);
    }

    #[test]
    fn costs_count_solver_steps() {
        let m = model(OdeMethod::Rk4);
        // 50 intervals of 0.2 at dt = 1/60
        assert_eq!(m.fresh_cost(1), 50.0 * 12.0);
        assert_eq!(m.level_cost(5), m.fresh_cost(5));
    }

    #[test]
    fn synthetic_is_reproducible() {
        let a = model(OdeMethod::Rk4);
        let b = model(OdeMethod::Rk4);
        assert_eq!(a.observations(), b.observations());
        assert_eq!(LvModel::log_params(&[0.0; 4]), PRIOR_MEAN);
    }
}
