//! Multi-fidelity simulated annealing moves on an energy `E_K(theta)`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::fidelity::propose_fidelity;
use super::{accept, ProposalSpec};
use crate::error::{Error, Result};
use crate::truncation::TruncationDistribution;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AnnealSchedule {
    /// `T(t) = t0 / ln(t + e)`.
    Logarithmic { t0: f64 },
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule::Logarithmic { t0: 1.0 }
    }
}

impl AnnealSchedule {
    pub fn validate(&self) -> Result<()> {
        let AnnealSchedule::Logarithmic { t0 } = *self;
        if !(t0 > 0.0 && t0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "initial temperature must be positive, got {t0}"
            )));
        }
        Ok(())
    }

    pub fn temperature(&self, t: usize) -> f64 {
        match *self {
            AnnealSchedule::Logarithmic { t0 } => t0 / (t as f64 + std::f64::consts::E).ln(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SaThetaOutcome {
    pub state: Vec<f64>,
    pub energy: f64,
    pub accepted: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SaFidelityOutcome {
    pub k: usize,
    pub energy: f64,
    pub accepted: bool,
    pub proposed: Option<usize>,
}

/// Accepts with `exp(-(E(theta') - E(theta)) / T)`. The proposal's own
/// asymmetry is deliberately ignored, as is usual for annealing.
pub fn sa_theta_step<F, R>(
    theta: &[f64],
    energy: f64,
    mut energy_at: F,
    temperature: f64,
    proposal: &ProposalSpec,
    rng: &mut R,
) -> Result<SaThetaOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let candidate = proposal.propose(theta, rng);
    let e = energy_at(&candidate)?;
    if accept(-(e - energy) / temperature, rng) {
        Ok(SaThetaOutcome {
            state: candidate,
            energy: e,
            accepted: true,
        })
    } else {
        Ok(SaThetaOutcome {
            state: theta.to_vec(),
            energy,
            accepted: false,
        })
    }
}

/// Accepts `K -> K'` with `exp(-(E_K' - E_K) / T) (mu(K') / mu(K))^(1/T)`.
pub fn sa_fidelity_step<F, R>(
    k: usize,
    energy: f64,
    mut energy_at: F,
    temperature: f64,
    dist: &TruncationDistribution,
    rng: &mut R,
) -> Result<SaFidelityOutcome>
where
    F: FnMut(usize) -> Result<f64>,
    R: Rng + ?Sized,
{
    let stay = |proposed| SaFidelityOutcome {
        k,
        energy,
        accepted: false,
        proposed,
    };
    let Some(candidate) = propose_fidelity(k, dist.k_max(), rng) else {
        return Ok(stay(None));
    };
    let e = energy_at(candidate)?;
    let log_ratio = (-(e - energy) + dist.log_pmf(candidate)? - dist.log_pmf(k)?) / temperature;
    if accept(log_ratio, rng) {
        Ok(SaFidelityOutcome {
            k: candidate,
            energy: e,
            accepted: true,
            proposed: Some(candidate),
        })
    } else {
        Ok(stay(Some(candidate)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn schedule_is_positive_and_nonincreasing() {
        let s = AnnealSchedule::default();
        assert!((s.temperature(0) - 1.0).abs() < 1e-15);
        let mut prev = f64::INFINITY;
        for t in [0, 1, 2, 10, 100, 10_000, 1_000_000] {
            let temp = s.temperature(t);
            assert!(temp > 0.0 && temp <= prev);
            prev = temp;
        }
        assert!(AnnealSchedule::Logarithmic { t0: 0.0 }.validate().is_err());
    }

    #[test]
    fn downhill_always_accepted() {
        let p = ProposalSpec::TruncatedNormal { scale: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for temp in [0.01, 1.0, 50.0] {
            let out = sa_theta_step(&[1.0], 0.0, |_| Ok(-1.0), temp, &p, &mut rng).unwrap();
            assert!(out.accepted);
        }
    }

    #[test]
    fn uphill_probability() {
        let p = ProposalSpec::TruncatedNormal { scale: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 100_000;
        let hits = (0..n)
            .filter(|_| sa_theta_step(&[1.0], 0.0, |_| Ok(1.0), 0.5, &p, &mut rng).unwrap().accepted)
            .count();
        let expect = (-2.0f64).exp();
        let freq = hits as f64 / n as f64;
        assert!((freq - expect).abs() < 4.0 * (expect * (1.0 - expect) / n as f64).sqrt());
    }

    #[test]
    fn fidelity_moves() {
        let gamma0 = 0.25;
        let dist = TruncationDistribution::geometric(gamma0).unwrap();
        let temp = 0.5;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let (mut up, mut up_acc) = (0, 0);
        for _ in 0..100_000 {
            let out = sa_fidelity_step(3, 2.0, |_| Ok(2.0), temp, &dist, &mut rng).unwrap();
            if out.proposed == Some(4) {
                up += 1;
                up_acc += out.accepted as usize;
            }
        }
        let p = (1.0 - gamma0).powf(1.0 / temp);
        let freq = up_acc as f64 / up as f64;
        assert!((freq - p).abs() < 4.0 * (p * (1.0 - p) / up as f64).sqrt(), "{freq} vs {p}");

        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let out = sa_fidelity_step(1, 0.0, |_| Ok(-5.0), 1.0, &dist, &mut rng).unwrap();
            if out.proposed.is_none() {
                assert_eq!(out.k, 1);
            }
        }
    }

    #[test]
    fn hot_limit_accepts_everything() {
        let dist = TruncationDistribution::geometric(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = ProposalSpec::GaussianRandomWalk { scale: 1.0 };
        for _ in 0..1000 {
            assert!(sa_theta_step(&[0.0], 0.0, |_| Ok(30.0), 1e300, &p, &mut rng).unwrap().accepted);
            let out = sa_fidelity_step(5, 0.0, |_| Ok(30.0), 1e300, &dist, &mut rng).unwrap();
            assert!(out.accepted);
        }
    }
}
