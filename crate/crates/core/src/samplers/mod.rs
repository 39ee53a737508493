//! Markov transition kernels.
//!
//! Every kernel takes its log target (or energy) as a closure over the state
//! and the value at the current state, so callers can cache evaluations and
//! account for their cost.

pub mod anneal;
pub mod ess;
pub mod fidelity;
pub mod mh;
pub mod proposal;
pub mod slice;

use rand::Rng;

pub use anneal::{sa_fidelity_step, sa_theta_step, AnnealSchedule};
pub use ess::{ess_step, EssOutcome, ESS_MAX_ITERATIONS};
pub use fidelity::{fidelity_step, propose_fidelity, FidelityOutcome};
pub use mh::{mh_step, two_stage_mh_step, MhOutcome, TwoStageOutcome, TwoStagePoint};
pub use proposal::ProposalSpec;
pub use slice::{slice_step, SliceOutcome, SliceSpec};

/// Metropolis accept test on a log ratio.
///
/// No uniform is drawn when the outcome is certain (`log_ratio >= 0`,
/// `-inf` or NaN), so two kernels that agree on every ratio consume the
/// stream identically.
pub fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    if log_ratio.is_nan() || log_ratio == f64::NEG_INFINITY {
        return false;
    }
    if log_ratio >= 0.0 {
        return true;
    }
    rng.random::<f64>().ln() < log_ratio
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn certain_outcomes_do_not_touch_the_stream() {
        let mut a = ChaCha8Rng::seed_from_u64(1);
        let b = a.clone();
        assert!(accept(0.0, &mut a));
        assert!(accept(3.0, &mut a));
        assert!(!accept(f64::NEG_INFINITY, &mut a));
        assert!(!accept(f64::NAN, &mut a));
        assert_eq!(a, b);
    }

    #[test]
    fn acceptance_frequency() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let n = 100_000;
        let p = (-0.5f64).exp();
        let hits = (0..n).filter(|_| accept(-0.5, &mut rng)).count() as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits - p).abs() < 4.0 * se, "{hits}");
    }
}
