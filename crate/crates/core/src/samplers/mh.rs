//! Random-walk Metropolis-Hastings and its two-stage (delayed acceptance)
//! variant.

use rand::Rng;

use super::{accept, ProposalSpec};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct MhOutcome {
    pub state: Vec<f64>,
    pub log_target: f64,
    pub accepted: bool,
}

/// One M-H step. A non-finite log target at the proposal is a rejection.
pub fn mh_step<F, R>(
    theta: &[f64],
    current: f64,
    mut log_target: F,
    proposal: &ProposalSpec,
    rng: &mut R,
) -> Result<MhOutcome>
where
    F: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let candidate = proposal.propose(theta, rng);
    let value = log_target(&candidate)?;
    let log_ratio = if value.is_finite() {
        value - current + proposal.log_correction(theta, &candidate)
    } else {
        f64::NEG_INFINITY
    };
    Ok(if accept(log_ratio, rng) {
        MhOutcome {
            state: candidate,
            log_target: value,
            accepted: true,
        }
    } else {
        MhOutcome {
            state: theta.to_vec(),
            log_target: current,
            accepted: false,
        }
    })
}

/// State of a two-stage chain: prior and both likelihoods at `theta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoStagePoint {
    pub theta: Vec<f64>,
    pub log_prior: f64,
    pub log_lf: f64,
    pub log_hf: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoStageOutcome {
    pub point: TwoStagePoint,
    pub passed_first_stage: bool,
    pub accepted: bool,
    pub hf_evaluations: usize,
}

/// Screens the proposal with the low-fidelity posterior; only survivors pay
/// for a high-fidelity evaluation. The second stage uses
/// `L_hf(t') L_lf(t) / (L_hf(t) L_lf(t'))`, which leaves the high-fidelity
/// posterior invariant.
pub fn two_stage_mh_step<P, L, H, R>(
    current: &TwoStagePoint,
    mut log_prior: P,
    mut log_lf: L,
    mut log_hf: H,
    proposal: &ProposalSpec,
    rng: &mut R,
) -> Result<TwoStageOutcome>
where
    P: FnMut(&[f64]) -> f64,
    L: FnMut(&[f64]) -> Result<f64>,
    H: FnMut(&[f64]) -> Result<f64>,
    R: Rng + ?Sized,
{
    let reject = |hf_evaluations, passed| TwoStageOutcome {
        point: current.clone(),
        passed_first_stage: passed,
        accepted: false,
        hf_evaluations,
    };
    let candidate = proposal.propose(&current.theta, rng);
    let prior = log_prior(&candidate);
    let lf = log_lf(&candidate)?;
    let first = if prior.is_finite() && lf.is_finite() {
        (prior + lf) - (current.log_prior + current.log_lf)
            + proposal.log_correction(&current.theta, &candidate)
    } else {
        f64::NEG_INFINITY
    };
    if !accept(first, rng) {
        return Ok(reject(0, false));
    }
    let hf = log_hf(&candidate)?;
    let second = if hf.is_finite() {
        (hf - current.log_hf) - (lf - current.log_lf)
    } else {
        f64::NEG_INFINITY
    };
    if !accept(second, rng) {
        return Ok(reject(1, true));
    }
    Ok(TwoStageOutcome {
        point: TwoStagePoint {
            theta: candidate,
            log_prior: prior,
            log_lf: lf,
            log_hf: hf,
        },
        passed_first_stage: true,
        accepted: true,
        hf_evaluations: 1,
    })
}
