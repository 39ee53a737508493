use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};

/// State proposals. The scale is shared by all coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProposalSpec {
    GaussianRandomWalk { scale: f64 },
    /// Random walk restricted to the nonnegative orthant, coordinate-wise,
    /// drawn by rejection from the untruncated normal.
    TruncatedNormal { scale: f64 },
}

/// `log Phi(x)` for the standard normal CDF.
fn log_std_normal_cdf(x: f64) -> f64 {
    (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
}

impl ProposalSpec {
    pub fn scale(&self) -> f64 {
        match *self {
            ProposalSpec::GaussianRandomWalk { scale } | ProposalSpec::TruncatedNormal { scale } => {
                scale
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let s = self.scale();
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "proposal scale must be positive, got {s}"
            )));
        }
        Ok(())
    }

    pub fn is_symmetric(&self) -> bool {
        matches!(self, ProposalSpec::GaussianRandomWalk { .. })
    }

    pub fn propose<R: Rng + ?Sized>(&self, theta: &[f64], rng: &mut R) -> Vec<f64> {
        match *self {
            ProposalSpec::GaussianRandomWalk { scale } => theta
                .iter()
                .map(|t| t + scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            ProposalSpec::TruncatedNormal { scale } => theta
                .iter()
                .map(|&t| loop {
                    let x = t + scale * rng.sample::<f64, _>(StandardNormal);
                    if x >= 0.0 {
                        break x;
                    }
                })
                .collect(),
        }
    }

    /// `log q(from | to) - log q(to | from)`.
    pub fn log_correction(&self, from: &[f64], to: &[f64]) -> f64 {
        match *self {
            ProposalSpec::GaussianRandomWalk { .. } => 0.0,
            // the Gaussian kernels cancel; only the truncation masses remain
            ProposalSpec::TruncatedNormal { scale } => from
                .iter()
                .zip(to)
                .map(|(f, t)| log_std_normal_cdf(f / scale) - log_std_normal_cdf(t / scale))
                .sum(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_stays_nonnegative() {
        let p = ProposalSpec::TruncatedNormal { scale: 0.3 };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10_000 {
            let x = p.propose(&[0.0, 0.05], &mut rng);
            assert!(x.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn correction_terms() {
        let rw = ProposalSpec::GaussianRandomWalk { scale: 1.0 };
        assert_eq!(rw.log_correction(&[0.0], &[5.0]), 0.0);
        let tn = ProposalSpec::TruncatedNormal { scale: 1.0 };
        // Phi(0) = 1/2, Phi(large) ~ 1
        let c = tn.log_correction(&[0.0], &[40.0]);
        assert!((c - 0.5f64.ln()).abs() < 1e-12);
        assert_eq!(tn.log_correction(&[0.7], &[0.7]), 0.0);
    }

    #[test]
    fn truncated_density_matches_mass() {
        // from theta = 0 exactly half the untruncated mass is kept, so the
        // proposal is the half-normal with mean scale * sqrt(2 / pi)
        let tn = ProposalSpec::TruncatedNormal { scale: 0.5 };
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let n = 100_000;
        let mean = (0..n).map(|_| tn.propose(&[0.0], &mut rng)[0]).sum::<f64>() / n as f64;
        let expect = 0.5 * (2.0 / std::f64::consts::PI).sqrt();
        let sd = 0.5 * (1.0 - 2.0 / std::f64::consts::PI).sqrt();
        assert!((mean - expect).abs() < 4.0 * sd / (n as f64).sqrt());
    }

    #[test]
    fn rejects_bad_scale() {
        assert!(ProposalSpec::GaussianRandomWalk { scale: 0.0 }.validate().is_err());
        assert!(ProposalSpec::TruncatedNormal { scale: f64::NAN }.validate().is_err());
        assert!(ProposalSpec::TruncatedNormal { scale: 0.3 }.validate().is_ok());
    }
}
