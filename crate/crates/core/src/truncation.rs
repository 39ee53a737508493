//! Truncation distributions over fidelities and the estimator weight rules.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K_MAX: usize = 1_000_000;

/// Distribution over fidelities `K in {1, 2, ...}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationDistribution {
    kind: TruncationKind,
    k_max: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TruncationKind {
    /// `pmf(k) = gamma0 (1 - gamma0)^(k-1)`.
    Geometric { gamma0: f64 },
}

impl TruncationDistribution {
    pub fn geometric(gamma0: f64) -> Result<Self> {
        Self::geometric_with_cap(gamma0, DEFAULT_K_MAX)
    }

    pub fn geometric_with_cap(gamma0: f64, k_max: usize) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0 < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "gamma0 must lie in (0, 1), got {gamma0}"
            )));
        }
        if k_max < 1 {
            return Err(Error::InvalidArgument("k_max must be at least 1".into()));
        }
        Ok(Self {
            kind: TruncationKind::Geometric { gamma0 },
            k_max,
        })
    }

    pub fn kind(&self) -> TruncationKind {
        self.kind
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn gamma0(&self) -> f64 {
        match self.kind {
            TruncationKind::Geometric { gamma0 } => gamma0,
        }
    }

    fn check(&self, k: usize) -> Result<()> {
        if k < 1 {
            return Err(Error::FidelityOutOfRange { k, k_max: self.k_max });
        }
        Ok(())
    }

    pub fn pmf(&self, k: usize) -> Result<f64> {
        self.log_pmf(k).map(f64::exp)
    }

    pub fn log_pmf(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(match self.kind {
            TruncationKind::Geometric { gamma0 } => {
                gamma0.ln() + (k - 1) as f64 * (-gamma0).ln_1p()
            }
        })
    }

    /// `P(K >= k) = 1 - sum_{k' < k} pmf(k')`.
    pub fn survival(&self, k: usize) -> Result<f64> {
        self.log_survival(k).map(f64::exp)
    }

    pub fn log_survival(&self, k: usize) -> Result<f64> {
        self.check(k)?;
        Ok(match self.kind {
            TruncationKind::Geometric { gamma0 } => (k - 1) as f64 * (-gamma0).ln_1p(),
        })
    }

    pub fn mean(&self) -> f64 {
        match self.kind {
            TruncationKind::Geometric { gamma0 } => 1.0 / gamma0,
        }
    }

    /// Draws a fidelity. Draws above the cap are reported as an error rather
    /// than clamped.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<usize> {
        match self.kind {
            TruncationKind::Geometric { gamma0 } => {
                // inversion on (0, 1]
                let u = 1.0 - rng.random::<f64>();
                let failures = (u.ln() / (-gamma0).ln_1p()).floor();
                if !(failures < self.k_max as f64) {
                    return Err(Error::FidelityCapExceeded { k_max: self.k_max });
                }
                Ok(failures as usize + 1)
            }
        }
    }
}

/// How the telescoping increments are reweighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorScheme {
    /// Every increment up to `K` is kept and divided by its survival probability.
    RussianRoulette,
    /// Only increment `K` is kept and divided by `pmf(K)`.
    SingleTerm,
}

impl EstimatorScheme {
    /// Log of `w_{k,K}`; `-inf` when the increment is dropped.
    pub fn log_weight(
        self,
        k: usize,
        truncation: usize,
        dist: &TruncationDistribution,
    ) -> Result<f64> {
        if k < 1 || k > truncation {
            return Err(Error::InvalidArgument(format!(
                "weight requested for increment {k} with truncation {truncation}"
            )));
        }
        match self {
            EstimatorScheme::RussianRoulette => Ok(-dist.log_survival(k)?),
            EstimatorScheme::SingleTerm => {
                if k == truncation {
                    Ok(-dist.log_pmf(truncation)?)
                } else {
                    Ok(f64::NEG_INFINITY)
                }
            }
        }
    }

    pub fn weight(self, k: usize, truncation: usize, dist: &TruncationDistribution) -> Result<f64> {
        self.log_weight(k, truncation, dist).map(f64::exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pmf_examples() {
        let g = TruncationDistribution::geometric(0.1).unwrap();
        assert!((g.pmf(1).unwrap() - 0.1).abs() < 1e-15);
        assert!((g.pmf(2).unwrap() - 0.09).abs() < 1e-15);
        let h = TruncationDistribution::geometric(0.5).unwrap();
        assert!((h.pmf(3).unwrap() - 0.125).abs() < 1e-15);
        assert!(g.pmf(0).is_err());
    }

    #[test]
    fn rejects_bad_gamma() {
        for g in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
            assert!(TruncationDistribution::geometric(g).is_err());
        }
    }

    #[test]
    fn survival_properties() {
        for gamma0 in [0.1, 0.5] {
            let g = TruncationDistribution::geometric(gamma0).unwrap();
            assert_eq!(g.survival(1).unwrap(), 1.0);
            let mut acc = 0.0;
            for k in 1..60 {
                let s = g.survival(k).unwrap();
                assert!((s - (1.0 - acc)).abs() < 1e-12);
                assert!(g.survival(k + 1).unwrap() < s);
                acc += g.pmf(k).unwrap();
            }
        }
    }

    #[test]
    fn pmf_sums_to_one() {
        let g = TruncationDistribution::geometric(0.1).unwrap();
        let total: f64 = (1..2000).map(|k| g.pmf(k).unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn weight_examples() {
        let g = TruncationDistribution::geometric(0.5).unwrap();
        let rr = EstimatorScheme::RussianRoulette;
        let st = EstimatorScheme::SingleTerm;
        for big_k in [1, 3, 10] {
            assert!((rr.weight(1, big_k, &g).unwrap() - 1.0).abs() < 1e-15);
        }
        assert!((rr.weight(3, 3, &g).unwrap() - 4.0).abs() < 1e-12);
        assert!((rr.weight(3, 7, &g).unwrap() - 4.0).abs() < 1e-12);
        assert!((st.weight(3, 3, &g).unwrap() - 8.0).abs() < 1e-12);
        assert_eq!(st.weight(2, 3, &g).unwrap(), 0.0);
        assert!(rr.weight(4, 3, &g).is_err());
        assert!(st.weight(0, 3, &g).is_err());
    }

    #[test]
    fn degenerate_gamma_returns_one() {
        let g = TruncationDistribution::geometric(1.0 - 1e-12).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10_000 {
            assert_eq!(g.sample(&mut rng).unwrap(), 1);
        }
    }

    #[test]
    fn empirical_mean_matches_geometric() {
        let g = TruncationDistribution::geometric(0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| g.sample(&mut rng).unwrap() as f64).collect();
        let mean = draws.iter().sum::<f64>() / n as f64;
        // analytic variance (1 - g) / g^2 = 90
        let se = (90.0f64 / n as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se, "mean {mean}, se {se}");
    }

    #[test]
    fn empirical_pmf_at_one() {
        let g = TruncationDistribution::geometric(0.25).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let ones = (0..n).filter(|_| g.sample(&mut rng).unwrap() == 1).count();
        let p = ones as f64 / n as f64;
        let se = (0.25f64 * 0.75 / n as f64).sqrt();
        assert!((p - 0.25).abs() < 3.0 * se, "p {p}");
    }

    #[test]
    fn cap_is_enforced() {
        let g = TruncationDistribution::geometric_with_cap(0.001, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let hit = (0..1000).any(|_| matches!(g.sample(&mut rng), Err(Error::FidelityCapExceeded { .. })));
        assert!(hit);
    }

    /// E_K[sum_{k<=K} w_{k,K} d_k] = sum_k d_k, computed exactly: the expectation
    /// over K <= n is summed term by term and the tail K > n is added in closed
    /// form via the survival function.
    #[test]
    fn weights_are_unbiased_for_finite_sequences() {
        let increments = [0.7, -1.3, 2.0, 0.25, -0.6, 1.1];
        let n = increments.len();
        let target: f64 = increments.iter().sum();
        for gamma0 in [0.1, 0.5] {
            let g = TruncationDistribution::geometric(gamma0).unwrap();
            for scheme in [EstimatorScheme::RussianRoulette, EstimatorScheme::SingleTerm] {
                let estimate = |big_k: usize| -> f64 {
                    (1..=big_k)
                        .map(|k| {
                            let d = if k <= n { increments[k - 1] } else { 0.0 };
                            scheme.weight(k, big_k, &g).unwrap() * d
                        })
                        .sum()
                };
                let mut expectation = 0.0;
                for big_k in 1..=n {
                    expectation += g.pmf(big_k).unwrap() * estimate(big_k);
                }
                // for K > n the estimate no longer depends on K
                let tail_mass = g.survival(n + 1).unwrap();
                let tail_value = match scheme {
                    EstimatorScheme::RussianRoulette => estimate(n + 1),
                    EstimatorScheme::SingleTerm => 0.0,
                };
                assert_eq!(estimate(n + 5), tail_value);
                expectation += tail_mass * tail_value;
                assert!(
                    (expectation - target).abs() < 1e-12,
                    "{scheme:?} gamma0={gamma0}: {expectation} vs {target}"
                );
            }
        }
    }
}
