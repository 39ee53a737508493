//! Level values memoized for one state, so that fidelity and state updates
//! within an iteration never pay twice for the same level.

use crate::error::Result;
use crate::estimator::{check_level, combine_levels, TargetSequence};
use crate::signed_log::SignedLog;
use crate::truncation::{EstimatorScheme, TruncationDistribution};

pub(crate) struct LevelCache<S: TargetSequence> {
    theta: Vec<f64>,
    levels: Vec<Option<f64>>,
    cursor: Option<S::Cursor>,
    cursor_level: usize,
}

impl<S: TargetSequence> LevelCache<S> {
    pub fn new(theta: &[f64]) -> Self {
        Self {
            theta: theta.to_vec(),
            levels: Vec::new(),
            cursor: None,
            cursor_level: 0,
        }
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    fn store(&mut self, k: usize, value: f64) {
        if self.levels.len() < k {
            self.levels.resize(k, None);
        }
        self.levels[k - 1] = Some(value);
    }

    /// `log L_k(theta)`. Missing levels are reached by advancing the cursor
    /// when that is no dearer than a fresh evaluation; each evaluation's cost
    /// is added to `ledger`.
    pub fn level(&mut self, seq: &S, k: usize, ledger: &mut f64) -> Result<f64> {
        if let Some(Some(v)) = self.levels.get(k - 1) {
            return Ok(*v);
        }
        let walk_cost = if self.cursor.is_some() && self.cursor_level < k {
            Some((self.cursor_level + 1..=k).map(|j| seq.level_cost(j)).sum::<f64>())
        } else {
            None
        };
        match walk_cost {
            Some(walk) if walk <= seq.fresh_cost(k) => {
                while self.cursor_level < k {
                    let cursor = self.cursor.as_mut().expect("cursor present");
                    let v = seq.advance(cursor)?;
                    self.cursor_level += 1;
                    *ledger += seq.level_cost(self.cursor_level);
                    let v = check_level(self.cursor_level, v)?;
                    self.store(self.cursor_level, v);
                }
            }
            _ => {
                let (cursor, v) = seq.start(&self.theta, k)?;
                *ledger += seq.fresh_cost(k);
                self.cursor = Some(cursor);
                self.cursor_level = k;
                let v = check_level(k, v)?;
                self.store(k, v);
            }
        }
        Ok(self.levels[k - 1].expect("level stored"))
    }

    pub fn estimate(
        &mut self,
        seq: &S,
        truncation: usize,
        scheme: EstimatorScheme,
        dist: &TruncationDistribution,
        ledger: &mut f64,
    ) -> Result<SignedLog> {
        match scheme {
            EstimatorScheme::RussianRoulette => {
                let mut levels = Vec::with_capacity(truncation);
                for k in 1..=truncation {
                    levels.push(self.level(seq, k, ledger)?);
                }
                combine_levels(&levels, truncation, scheme, dist)
            }
            EstimatorScheme::SingleTerm => {
                // lower level first so that a walking cursor can reuse it
                let below = if truncation > 1 {
                    self.level(seq, truncation - 1, ledger)?
                } else {
                    f64::NEG_INFINITY
                };
                let top = self.level(seq, truncation, ledger)?;
                let d = SignedLog::from_log(top) - SignedLog::from_log(below);
                Ok(d.scale_log(scheme.log_weight(truncation, truncation, dist)?))
            }
        }
    }
}
