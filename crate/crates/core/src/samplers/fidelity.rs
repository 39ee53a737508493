//! Metropolis update of the fidelity given the state, targeting
//! `mu(K) |estimate_K(theta)|`.

use rand::Rng;

use super::accept;
use crate::error::Result;
use crate::signed_log::SignedLog;
use crate::truncation::TruncationDistribution;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidelityOutcome {
    pub k: usize,
    pub estimate: SignedLog,
    pub accepted: bool,
    /// `None` when the coin pointed outside `1..=k_max`.
    pub proposed: Option<usize>,
    /// Both estimates were exactly zero, so the ratio was undefined.
    pub both_zero: bool,
}

/// Fair-coin `k +- 1` proposal; moves outside `1..=k_max` give `None`.
pub fn propose_fidelity<R: Rng + ?Sized>(k: usize, k_max: usize, rng: &mut R) -> Option<usize> {
    if rng.random_bool(0.5) {
        (k < k_max).then_some(k + 1)
    } else {
        (k > 1).then(|| k - 1)
    }
}

/// `estimate_at(k)` returns the estimator at truncation `k` for the current
/// state; `current` is its value at `k`.
pub fn fidelity_step<F, R>(
    k: usize,
    current: SignedLog,
    mut estimate_at: F,
    dist: &TruncationDistribution,
    rng: &mut R,
) -> Result<FidelityOutcome>
where
    F: FnMut(usize) -> Result<SignedLog>,
    R: Rng + ?Sized,
{
    let stay = |proposed, both_zero| FidelityOutcome {
        k,
        estimate: current,
        accepted: false,
        proposed,
        both_zero,
    };
    let Some(candidate) = propose_fidelity(k, dist.k_max(), rng) else {
        return Ok(stay(None, false));
    };
    let value = estimate_at(candidate)?;
    if value.is_zero() && current.is_zero() {
        return Ok(stay(Some(candidate), true));
    }
    let log_ratio = (dist.log_pmf(candidate)? + value.log_abs())
        - (dist.log_pmf(k)? + current.log_abs());
    if accept(log_ratio, rng) {
        Ok(FidelityOutcome {
            k: candidate,
            estimate: value,
            accepted: true,
            proposed: Some(candidate),
            both_zero: false,
        })
    } else {
        Ok(stay(Some(candidate), false))
    }
}
