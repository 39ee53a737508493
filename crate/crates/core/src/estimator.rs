//! Unbiased signed estimates of a limiting density from a sequence of
//! low-fidelity densities.
//!
//! With `L_0 = 0`, the estimate at truncation `K` is
//! `sum_{k<=K} w_{k,K} (L_k - L_{k-1})`, evaluated in signed log space.

use crate::error::{Error, Result};
use crate::signed_log::{Sign, SignedLog};
use crate::truncation::{EstimatorScheme, TruncationDistribution};

/// A sequence of unnormalized log densities `log L_k(theta)` converging in `k`.
///
/// The full target at fidelity `k` is `exp(log_prior(theta)) * L_k(theta)`;
/// only the fidelity-dependent factor is debiased.
pub trait TargetSequence {
    /// Incremental evaluation state for one `theta`.
    type Cursor;

    fn dim(&self) -> usize;

    /// Fidelity-independent log factor (for example the prior).
    fn log_prior(&self, _theta: &[f64]) -> f64 {
        0.0
    }

    /// Evaluates level `k` from scratch and returns a cursor positioned there.
    fn start(&self, theta: &[f64], k: usize) -> Result<(Self::Cursor, f64)>;

    /// Moves the cursor one level up and returns the new level's log density.
    /// Must agree bit-for-bit with `start(theta, level + 1)`.
    fn advance(&self, cursor: &mut Self::Cursor) -> Result<f64>;

    /// Cost of reaching level `k` from level `k - 1` with [`advance`](Self::advance).
    fn level_cost(&self, k: usize) -> f64;

    /// Cost of evaluating level `k` with [`start`](Self::start).
    fn fresh_cost(&self, k: usize) -> f64 {
        (1..=k).map(|j| self.level_cost(j)).sum()
    }

    fn log_level(&self, theta: &[f64], k: usize) -> Result<f64> {
        self.start(theta, k).map(|(_, v)| v)
    }

    /// Whether the sequence depends on auxiliary randomness that is held
    /// fixed across levels and refreshed between chain iterations.
    fn has_auxiliaries(&self) -> bool {
        false
    }

    fn auxiliary_seed(&self) -> u64 {
        0
    }

    fn set_auxiliary_seed(&mut self, _seed: u64) {}
}

/// Cursor for sequences whose levels are independent evaluations.
#[derive(Debug, Clone)]
pub struct FreshCursor {
    pub theta: Vec<f64>,
    pub level: usize,
}

impl FreshCursor {
    pub fn new(theta: &[f64], level: usize) -> Self {
        Self {
            theta: theta.to_vec(),
            level,
        }
    }
}

pub(crate) fn check_level(level: usize, value: f64) -> Result<f64> {
    if value.is_nan() || value == f64::INFINITY {
        return Err(Error::NonFiniteLevel { level, value });
    }
    Ok(value)
}

/// Result of one estimator evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimateRecord {
    /// Estimate of the limiting `L(theta)` (prior excluded).
    pub value: SignedLog,
    pub fidelity: usize,
    pub cost: f64,
    pub terms: usize,
}

impl EstimateRecord {
    pub fn sign(&self) -> Sign {
        self.value.sign()
    }
}

/// Combines level log densities `log L_1..log L_K` into the weighted
/// telescoping sum.
pub fn combine_levels(
    levels: &[f64],
    truncation: usize,
    scheme: EstimatorScheme,
    dist: &TruncationDistribution,
) -> Result<SignedLog> {
    if truncation < 1 || levels.len() < truncation {
        return Err(Error::InvalidArgument(format!(
            "need {truncation} levels, have {}",
            levels.len()
        )));
    }
    let increment = |k: usize| -> SignedLog {
        let current = SignedLog::from_log(levels[k - 1]);
        if k == 1 {
            current
        } else {
            current - SignedLog::from_log(levels[k - 2])
        }
    };
    match scheme {
        EstimatorScheme::RussianRoulette => {
            let mut total = SignedLog::ZERO;
            for k in 1..=truncation {
                let w = scheme.log_weight(k, truncation, dist)?;
                total = total + increment(k).scale_log(w);
            }
            Ok(total)
        }
        EstimatorScheme::SingleTerm => {
            let w = scheme.log_weight(truncation, truncation, dist)?;
            Ok(increment(truncation).scale_log(w))
        }
    }
}

/// Walks a sequence level by level, producing signed increments.
pub struct IncrementWalker<'a, S: TargetSequence + ?Sized> {
    seq: &'a S,
    theta: Vec<f64>,
    cursor: Option<S::Cursor>,
    level: usize,
    previous: f64,
    cost: f64,
}

impl<'a, S: TargetSequence + ?Sized> IncrementWalker<'a, S> {
    pub fn new(seq: &'a S, theta: &[f64]) -> Self {
        Self {
            seq,
            theta: theta.to_vec(),
            cursor: None,
            level: 0,
            previous: f64::NEG_INFINITY,
            cost: 0.0,
        }
    }

    pub fn level(&self) -> usize {
        self.level
    }

    pub fn cost(&self) -> f64 {
        self.cost
    }

    /// `L_k - L_{k-1}`; the walker must sit at level `k - 1`.
    pub fn increment(&mut self, k: usize) -> Result<SignedLog> {
        if k != self.level + 1 {
            return Err(Error::CursorMismatch {
                cursor: self.level,
                requested: k,
            });
        }
        let value = match self.cursor.as_mut() {
            None => {
                let (cursor, v) = self.seq.start(&self.theta, 1)?;
                self.cursor = Some(cursor);
                self.cost += self.seq.fresh_cost(1);
                v
            }
            Some(cursor) => {
                let v = self.seq.advance(cursor)?;
                self.cost += self.seq.level_cost(k);
                v
            }
        };
        let value = check_level(k, value)?;
        let d = SignedLog::from_log(value) - SignedLog::from_log(self.previous);
        self.previous = value;
        self.level = k;
        Ok(d)
    }
}

/// Evaluates the truncated telescoping estimator at `theta`.
pub fn estimate<S: TargetSequence + ?Sized>(
    seq: &S,
    theta: &[f64],
    truncation: usize,
    scheme: EstimatorScheme,
    dist: &TruncationDistribution,
) -> Result<EstimateRecord> {
    if truncation < 1 {
        return Err(Error::FidelityOutOfRange {
            k: truncation,
            k_max: dist.k_max(),
        });
    }
    match scheme {
        EstimatorScheme::RussianRoulette => {
            let mut walker = IncrementWalker::new(seq, theta);
            let mut total = SignedLog::ZERO;
            for k in 1..=truncation {
                let d = walker.increment(k)?;
                total = total + d.scale_log(scheme.log_weight(k, truncation, dist)?);
            }
            Ok(EstimateRecord {
                value: total,
                fidelity: truncation,
                cost: walker.cost(),
                terms: truncation,
            })
        }
        EstimatorScheme::SingleTerm => {
            let (top, lower, cost) = if truncation == 1 {
                let (_, v) = seq.start(theta, 1)?;
                (check_level(1, v)?, f64::NEG_INFINITY, seq.fresh_cost(1))
            } else {
                let (mut cursor, below) = seq.start(theta, truncation - 1)?;
                let below = check_level(truncation - 1, below)?;
                let top = check_level(truncation, seq.advance(&mut cursor)?)?;
                (
                    top,
                    below,
                    seq.fresh_cost(truncation - 1) + seq.level_cost(truncation),
                )
            };
            let d = SignedLog::from_log(top) - SignedLog::from_log(lower);
            Ok(EstimateRecord {
                value: d.scale_log(scheme.log_weight(truncation, truncation, dist)?),
                fidelity: truncation,
                cost,
                terms: 1,
            })
        }
    }
}
