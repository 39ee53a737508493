//! Elliptical slice sampling for latent vectors with a zero-mean Gaussian
//! prior. Only the likelihood is ever evaluated.

use std::f64::consts::TAU;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{mvn_sample, CholeskyFactor};

pub const ESS_MAX_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub struct EssOutcome {
    pub state: Vec<f64>,
    pub log_lik: f64,
    pub proposals: usize,
}

/// Shrinks the angle bracket towards zero after a rejection at `angle`.
pub fn shrink_bracket(angle: f64, lo: &mut f64, hi: &mut f64) {
    if angle < 0.0 {
        *lo = angle;
    } else {
        *hi = angle;
    }
}

pub fn ess_step<F, R>(
    f: &[f64],
    current_log_lik: f64,
    mut log_lik: F,
    prior: &CholeskyFactor,
    rng: &mut R,
) -> Result<EssOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    if f.len() != prior.dim() {
        return Err(Error::DimensionMismatch {
            expected: prior.dim(),
            got: f.len(),
        });
    }
    let nu = mvn_sample(prior, rng);
    let threshold = current_log_lik + rng.random::<f64>().ln();
    let mut angle = rng.random::<f64>() * TAU;
    let (mut lo, mut hi) = (angle - TAU, angle);
    let mut candidate = vec![0.0; f.len()];
    for proposals in 1..=ESS_MAX_ITERATIONS {
        let (s, c) = angle.sin_cos();
        for ((x, fi), ni) in candidate.iter_mut().zip(f).zip(&nu) {
            *x = fi * c + ni * s;
        }
        let value = log_lik(&candidate)?;
        if value > threshold {
            return Ok(EssOutcome {
                state: candidate,
                log_lik: value,
                proposals,
            });
        }
        shrink_bracket(angle, &mut lo, &mut hi);
        angle = lo + rng.random::<f64>() * (hi - lo);
    }
    Err(Error::EssNoProgress {
        max_iterations: ESS_MAX_ITERATIONS,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::cholesky;
    use nalgebra::DMatrix;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corr_half() -> CholeskyFactor {
        cholesky(&DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0])).unwrap()
    }

    #[test]
    fn bracket_shrinks_towards_zero() {
        let (mut lo, mut hi) = (-4.0, 2.0);
        shrink_bracket(-1.5, &mut lo, &mut hi);
        assert_eq!((lo, hi), (-1.5, 2.0));
        shrink_bracket(0.7, &mut lo, &mut hi);
        assert_eq!((lo, hi), (-1.5, 0.7));
    }

    #[test]
    fn constant_likelihood_recovers_prior_moments() {
        let prior = corr_half();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut f = vec![0.0, 0.0];
        let n = 10_000;
        let mut sum = [0.0; 2];
        let mut cross = [0.0; 3];
        for _ in 0..n {
            let out = ess_step(&f, 0.0, |_| Ok(0.0), &prior, &mut rng).unwrap();
            assert_eq!(out.proposals, 1);
            f = out.state;
            sum[0] += f[0];
            sum[1] += f[1];
            cross[0] += f[0] * f[0];
            cross[1] += f[1] * f[1];
            cross[2] += f[0] * f[1];
        }
        let n = n as f64;
        // moment SEs for N(0, S): Var(x_i) = 1, Var(x_i^2) = 2, Var(x0 x1) = 1 + rho^2
        for s in sum {
            assert!((s / n).abs() < 4.0 / n.sqrt());
        }
        assert!((cross[0] / n - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!((cross[1] / n - 1.0).abs() < 4.0 * (2.0 / n).sqrt());
        assert!((cross[2] / n - 0.5).abs() < 4.0 * (1.25 / n).sqrt());
    }

    #[test]
    fn accepted_states_beat_the_threshold() {
        let prior = corr_half();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let lik = |x: &[f64]| Ok(-2.0 * ((x[0] - 1.0).powi(2) + (x[1] + 0.5).powi(2)));
        let mut f = vec![0.0, 0.0];
        let mut ll = lik(&f).unwrap();
        for _ in 0..2000 {
            // replay the threshold draw on a cloned stream
            let mut probe = rng.clone();
            let _ = mvn_sample(&prior, &mut probe);
            let threshold = ll + probe.random::<f64>().ln();
            let out = ess_step(&f, ll, lik, &prior, &mut rng).unwrap();
            assert!(out.log_lik > threshold);
            f = out.state;
            ll = out.log_lik;
        }
    }

    #[test]
    fn never_touches_the_prior_density() {
        // the only callback is the likelihood; count its calls
        let prior = corr_half();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut calls = 0;
        let out = ess_step(
            &[0.2, -0.1],
            -1.0,
            |x| {
                calls += 1;
                Ok(-x[0] * x[0])
            },
            &prior,
            &mut rng,
        )
        .unwrap();
        assert_eq!(calls, out.proposals);
    }

    #[test]
    fn guard_triggers_on_impossible_threshold() {
        let prior = corr_half();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let err = ess_step(&[0.0, 0.0], 0.0, |_| Ok(f64::NEG_INFINITY), &prior, &mut rng)
            .unwrap_err();
        assert!(matches!(err, Error::EssNoProgress { .. }));
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let prior = corr_half();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(ess_step(&[0.0], 0.0, |_| Ok(0.0), &prior, &mut rng).is_err());
    }
}
