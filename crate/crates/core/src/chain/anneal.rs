//! Simulated annealing over `(theta, K)` for optimisation problems whose
//! objective is only available through a sequence of discretised energies.

use std::cell::Cell;

use super::{chain_rngs, ChainSample};
use crate::error::{Error, Result};
use crate::samplers::{sa_fidelity_step, sa_theta_step, AnnealSchedule, ProposalSpec};
use crate::signed_log::Sign;
use crate::truncation::TruncationDistribution;

pub trait EnergySequence {
    fn dim(&self) -> usize;

    /// Energy of `theta` at fidelity `k`.
    fn energy(&self, theta: &[f64], k: usize) -> Result<f64>;

    /// Cost of one energy evaluation at fidelity `k`.
    fn cost(&self, k: usize) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnnealMode {
    /// Anneal jointly over the fidelity with prior weights `mu(K)`.
    Multi(TruncationDistribution),
    /// Fixed fidelity.
    Single(usize),
}

#[derive(Debug, Clone)]
pub struct AnnealConfig {
    pub iterations: usize,
    pub seed: u64,
    pub chain_id: u64,
    pub schedule: AnnealSchedule,
    pub proposal: ProposalSpec,
    pub mode: AnnealMode,
    pub initial_theta: Vec<f64>,
    /// Starting fidelity in multi-fidelity mode; defaults to 1.
    pub initial_k: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct AnnealRun {
    /// State after every iteration; signs are always positive.
    pub trace: Vec<ChainSample>,
    /// Energy of each traced state at its own fidelity.
    pub energies: Vec<f64>,
    pub best_theta: Vec<f64>,
    pub best_energy: f64,
    pub best_k: usize,
    pub evaluations: usize,
    pub total_cost: f64,
}

/// One iteration is a state move at the current fidelity followed, in
/// multi-fidelity mode, by a fidelity move at the same temperature.
pub fn run_annealing<E: EnergySequence>(seq: &E, config: &AnnealConfig) -> Result<AnnealRun> {
    config.schedule.validate()?;
    config.proposal.validate()?;
    if config.initial_theta.len() != seq.dim() {
        return Err(Error::DimensionMismatch {
            expected: seq.dim(),
            got: config.initial_theta.len(),
        });
    }
    let mut k = match config.mode {
        AnnealMode::Single(k) => k,
        AnnealMode::Multi(dist) => {
            let k = config.initial_k.unwrap_or(1);
            if k > dist.k_max() {
                return Err(Error::FidelityOutOfRange { k, k_max: dist.k_max() });
            }
            k
        }
    };
    if k == 0 {
        return Err(Error::InvalidArgument("fidelity must be at least 1".into()));
    }
    let (mut k_rng, mut theta_rng) = chain_rngs(config.seed, config.chain_id);
    let cost = Cell::new(0.0);
    let evaluations = Cell::new(0usize);
    let eval = |theta: &[f64], k: usize| -> Result<f64> {
        cost.set(cost.get() + seq.cost(k));
        evaluations.set(evaluations.get() + 1);
        let e = seq.energy(theta, k)?;
        if e.is_nan() {
            return Err(Error::NonFinite {
                what: format!("energy at fidelity {k}"),
                value: e,
            });
        }
        Ok(e)
    };

    let mut theta = config.initial_theta.clone();
    let mut energy = eval(&theta, k)?;
    let (mut best_theta, mut best_energy, mut best_k) = (theta.clone(), energy, k);
    let mut trace = Vec::with_capacity(config.iterations);
    let mut energies = Vec::with_capacity(config.iterations);
    for t in 0..config.iterations {
        let wrap = |e| Error::Chain {
            iteration: t,
            source: Box::new(e),
        };
        let temp = config.schedule.temperature(t);
        let step = sa_theta_step(&theta, energy, |c| eval(c, k), temp, &config.proposal, &mut theta_rng)
            .map_err(wrap)?;
        theta = step.state;
        energy = step.energy;
        if let AnnealMode::Multi(dist) = &config.mode {
            let th = &theta;
            let step = sa_fidelity_step(k, energy, |c| eval(th, c), temp, dist, &mut k_rng)
                .map_err(wrap)?;
            k = step.k;
            energy = step.energy;
        }
        if energy < best_energy {
            best_theta.clone_from(&theta);
            best_energy = energy;
            best_k = k;
        }
        trace.push(ChainSample {
            iter: t,
            k,
            sign: Sign::Positive,
            cum_cost: cost.get(),
            theta: theta.clone(),
        });
        energies.push(energy);
    }
    Ok(AnnealRun {
        trace,
        energies,
        best_theta,
        best_energy,
        best_k,
        evaluations: evaluations.get(),
        total_cost: cost.get(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Quadratic bowl whose minimiser drifts towards 2 as the fidelity grows.
    struct Bowl;

    impl EnergySequence for Bowl {
        fn dim(&self) -> usize {
            1
        }
        fn energy(&self, theta: &[f64], k: usize) -> Result<f64> {
            Ok((theta[0] - 2.0 + 1.0 / k as f64).powi(2))
        }
        fn cost(&self, k: usize) -> f64 {
            k as f64
        }
    }

    fn config(mode: AnnealMode) -> AnnealConfig {
        AnnealConfig {
            iterations: 3000,
            seed: 4,
            chain_id: 0,
            schedule: AnnealSchedule::Logarithmic { t0: 0.05 },
            proposal: ProposalSpec::GaussianRandomWalk { scale: 0.2 },
            mode,
            initial_theta: vec![-1.0],
            initial_k: None,
        }
    }

    #[test]
    fn single_fidelity_finds_the_minimum() {
        let run = run_annealing(&Bowl, &config(AnnealMode::Single(10))).unwrap();
        assert!((run.best_theta[0] - 1.9).abs() < 0.05, "{:?}", run.best_theta);
        assert_eq!(run.evaluations, 3001);
        assert_eq!(run.total_cost, 30_010.0);
        assert_eq!(run.trace.last().unwrap().cum_cost, run.total_cost);
    }

    #[test]
    fn multi_fidelity_ledger_and_determinism() {
        let dist = TruncationDistribution::geometric(0.2).unwrap();
        let a = run_annealing(&Bowl, &config(AnnealMode::Multi(dist))).unwrap();
        let b = run_annealing(&Bowl, &config(AnnealMode::Multi(dist))).unwrap();
        assert_eq!(a.trace, b.trace);
        // every iteration evaluates at least the state proposal
        for w in a.trace.windows(2) {
            assert!(w[1].cum_cost > w[0].cum_cost);
        }
        assert!(a.evaluations > 3001 && a.evaluations <= 6001);
        assert!(a.best_energy <= a.energies.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    #[test]
    fn rejects_bad_start() {
        let mut c = config(AnnealMode::Single(0));
        assert!(run_annealing(&Bowl, &c).is_err());
        c.mode = AnnealMode::Single(1);
        c.initial_theta = vec![0.0, 0.0];
        assert!(run_annealing(&Bowl, &c).is_err());
    }
}
