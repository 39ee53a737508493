use std::cell::Cell;

use super::{chain_rngs, ChainDiagnostics, ChainRun, ChainSample};
use crate::error::{Error, Result};
use crate::estimator::{check_level, TargetSequence};
use crate::samplers::{two_stage_mh_step, ProposalSpec, TwoStagePoint};
use crate::signed_log::Sign;

#[derive(Debug, Clone)]
pub struct TwoStageConfig {
    pub iterations: usize,
    pub seed: u64,
    pub chain_id: u64,
    pub proposal: ProposalSpec,
    pub k_lf: usize,
    pub k_hf: usize,
    pub initial_theta: Vec<f64>,
}

/// Two-stage M-H with fixed screening and target fidelities. Samples report
/// `K = k_hf` and a positive sign.
pub fn run_two_stage_chain<S: TargetSequence>(seq: &S, config: &TwoStageConfig) -> Result<ChainRun> {
    if config.k_lf < 1 || config.k_hf < 1 {
        return Err(Error::InvalidArgument("fidelities must be at least 1".into()));
    }
    let (_, mut rng) = chain_rngs(config.seed, config.chain_id);
    let ledger = Cell::new(0.0);
    let level = |theta: &[f64], k: usize| -> Result<f64> {
        ledger.set(ledger.get() + seq.fresh_cost(k));
        check_level(k, seq.log_level(theta, k)?)
    };
    let theta0 = config.initial_theta.clone();
    let mut point = TwoStagePoint {
        log_prior: seq.log_prior(&theta0),
        log_lf: level(&theta0, config.k_lf)?,
        log_hf: level(&theta0, config.k_hf)?,
        theta: theta0,
    };
    let mut samples = Vec::with_capacity(config.iterations);
    let mut diagnostics = ChainDiagnostics::default();
    for iter in 0..config.iterations {
        let out = two_stage_mh_step(
            &point,
            |t| seq.log_prior(t),
            |t| level(t, config.k_lf),
            |t| level(t, config.k_hf),
            &config.proposal,
            &mut rng,
        )
        .map_err(|e| Error::Chain {
            iteration: iter,
            source: Box::new(e),
        })?;
        diagnostics.theta_accepted += out.accepted as usize;
        point = out.point;
        samples.push(ChainSample {
            iter,
            k: config.k_hf,
            sign: Sign::Positive,
            cum_cost: ledger.get(),
            theta: point.theta.clone(),
        });
    }
    Ok(ChainRun {
        samples,
        diagnostics,
        total_cost: ledger.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{run_chain, ChainConfig, FidelityMode, StateKernel};
    use crate::models::toy::ToyModel;

    #[test]
    fn equal_fidelities_match_plain_mh() {
        let toy = ToyModel::new(vec![0.1, 0.9, 0.4, -0.2]);
        let proposal = ProposalSpec::GaussianRandomWalk { scale: 0.6 };
        let staged = run_two_stage_chain(
            &toy,
            &TwoStageConfig {
                iterations: 4000,
                seed: 3,
                chain_id: 1,
                proposal,
                k_lf: 7,
                k_hf: 7,
                initial_theta: vec![0.2],
            },
        )
        .unwrap();
        let plain = run_chain(
            &mut toy.clone(),
            &ChainConfig {
                iterations: 4000,
                seed: 3,
                chain_id: 1,
                mode: FidelityMode::Single { k: 7 },
                kernel: StateKernel::Mh(proposal),
                initial_theta: vec![0.2],
                initial_k: None,
            },
        )
        .unwrap();
        for (a, b) in staged.samples.iter().zip(&plain.samples) {
            assert_eq!(a.theta, b.theta);
        }
    }

    #[test]
    fn screening_saves_high_fidelity_cost() {
        let toy = ToyModel::new(vec![0.5; 20]);
        let run = run_two_stage_chain(
            &toy,
            &TwoStageConfig {
                iterations: 2000,
                seed: 1,
                chain_id: 0,
                proposal: ProposalSpec::GaussianRandomWalk { scale: 1.0 },
                k_lf: 5,
                k_hf: 100,
                initial_theta: vec![0.0],
            },
        )
        .unwrap();
        // every iteration pays for the screen; far fewer pay for the target
        let screens = 5.0 * 2001.0;
        let hf_paid = (run.total_cost - screens) / 100.0;
        assert!(hf_paid >= 1.0 && hf_paid < 1000.0, "{hf_paid}");
    }
}
