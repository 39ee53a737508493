use std::sync::Arc;

use rand::Rng;

use super::cache::LevelCache;
use super::{chain_rngs, ChainSample};
use crate::error::{Error, Result};
use crate::estimator::TargetSequence;
use crate::numerics::CholeskyFactor;
use crate::samplers::{accept, ess_step, fidelity_step, mh_step, slice_step, ProposalSpec, SliceSpec};
use crate::signed_log::SignedLog;
use crate::truncation::{EstimatorScheme, TruncationDistribution};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FidelityMode {
    /// Fidelity is a sampled auxiliary variable; the state update targets the
    /// absolute value of the truncated estimator.
    Multi {
        dist: TruncationDistribution,
        scheme: EstimatorScheme,
    },
    /// Ordinary MCMC on the fixed fidelity-`k` posterior.
    Single { k: usize },
}

#[derive(Debug, Clone)]
pub enum StateKernel {
    Mh(ProposalSpec),
    Slice(SliceSpec),
    /// Elliptical slice sampling under the given zero-mean Gaussian prior. The
    /// sequence's own `log_prior` is ignored by this kernel.
    Ess(Arc<CholeskyFactor>),
}

#[derive(Debug, Clone)]
pub struct ChainConfig {
    pub iterations: usize,
    pub seed: u64,
    pub chain_id: u64,
    pub mode: FidelityMode,
    pub kernel: StateKernel,
    pub initial_theta: Vec<f64>,
    /// Drawn from the truncation distribution when absent.
    pub initial_k: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, serde::Serialize)]
pub struct ChainDiagnostics {
    pub theta_accepted: usize,
    pub k_proposals: usize,
    pub k_accepted: usize,
    /// Fidelity proposals where both estimates were exactly zero.
    pub k_both_zero: usize,
    pub slice_shrink_failures: usize,
    pub aux_proposals: usize,
    pub aux_accepted: usize,
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub samples: Vec<ChainSample>,
    pub diagnostics: ChainDiagnostics,
    pub total_cost: f64,
}

fn evaluate<S: TargetSequence>(
    cache: &mut LevelCache<S>,
    seq: &S,
    mode: &FidelityMode,
    k: usize,
    ledger: &mut f64,
) -> Result<SignedLog> {
    match *mode {
        FidelityMode::Multi { dist, scheme } => cache.estimate(seq, k, scheme, &dist, ledger),
        FidelityMode::Single { k } => cache.level(seq, k, ledger).map(SignedLog::from_log),
    }
}

/// Runs one chain and collects its samples.
pub fn run_chain<S: TargetSequence>(seq: &mut S, config: &ChainConfig) -> Result<ChainRun> {
    let mut samples = Vec::with_capacity(config.iterations);
    let (diagnostics, total_cost) = run_chain_with(seq, config, |s| samples.push(s.clone()))?;
    Ok(ChainRun {
        samples,
        diagnostics,
        total_cost,
    })
}

/// Runs one chain, handing each sample to `sink` as it is produced. Each
/// iteration refreshes auxiliary randomness (when the sequence has any),
/// updates the fidelity, then updates the state.
pub fn run_chain_with<S, F>(
    seq: &mut S,
    config: &ChainConfig,
    mut sink: F,
) -> Result<(ChainDiagnostics, f64)>
where
    S: TargetSequence,
    F: FnMut(&ChainSample),
{
    if config.initial_theta.len() != seq.dim() {
        return Err(Error::DimensionMismatch {
            expected: seq.dim(),
            got: config.initial_theta.len(),
        });
    }
    let (mut aux_rng, mut state_rng) = chain_rngs(config.seed, config.chain_id);
    let mode = config.mode;
    let mut k = match mode {
        FidelityMode::Single { k } => k,
        FidelityMode::Multi { dist, .. } => match config.initial_k {
            Some(k) => k,
            None => dist.sample(&mut aux_rng)?,
        },
    };
    if k < 1 {
        return Err(Error::FidelityOutOfRange { k, k_max: usize::MAX });
    }
    if seq.has_auxiliaries() {
        seq.set_auxiliary_seed(aux_rng.random());
    }

    let mut ledger = 0.0;
    let mut diag = ChainDiagnostics::default();
    let mut cache = LevelCache::<S>::new(&config.initial_theta);
    let mut estimate = evaluate(&mut cache, seq, &mode, k, &mut ledger)
        .map_err(|e| wrap(0, e))?;

    for iter in 0..config.iterations {
        let step = |e| wrap(iter, e);

        if seq.has_auxiliaries() {
            diag.aux_proposals += 1;
            let old_seed = seq.auxiliary_seed();
            seq.set_auxiliary_seed(aux_rng.random());
            let mut fresh = LevelCache::<S>::new(cache.theta());
            let value = evaluate(&mut fresh, seq, &mode, k, &mut ledger).map_err(step)?;
            let log_ratio = if value.is_zero() && estimate.is_zero() {
                f64::NEG_INFINITY
            } else {
                value.log_abs() - estimate.log_abs()
            };
            if accept(log_ratio, &mut aux_rng) {
                diag.aux_accepted += 1;
                cache = fresh;
                estimate = value;
            } else {
                seq.set_auxiliary_seed(old_seed);
            }
        }

        if let FidelityMode::Multi { dist, .. } = mode {
            let seq_ref: &S = seq;
            let out = fidelity_step(
                k,
                estimate,
                |kk| evaluate(&mut cache, seq_ref, &mode, kk, &mut ledger),
                &dist,
                &mut aux_rng,
            )
            .map_err(step)?;
            diag.k_proposals += 1;
            diag.k_accepted += out.accepted as usize;
            diag.k_both_zero += out.both_zero as usize;
            k = out.k;
            estimate = out.estimate;
        }

        let seq_ref: &S = seq;
        let uses_prior = !matches!(config.kernel, StateKernel::Ess(_));
        let objective = |theta: &[f64], est: SignedLog| {
            if uses_prior {
                seq_ref.log_prior(theta) + est.log_abs()
            } else {
                est.log_abs()
            }
        };
        let current_theta = cache.theta().to_vec();
        let current_value = objective(&current_theta, estimate);
        let mut evaluated: Vec<(LevelCache<S>, SignedLog)> = Vec::new();
        let mut target = |theta: &[f64]| -> Result<f64> {
            let mut c = LevelCache::new(theta);
            let est = evaluate(&mut c, seq_ref, &mode, k, &mut ledger)?;
            evaluated.push((c, est));
            Ok(objective(theta, est))
        };
        let new_state = match &config.kernel {
            StateKernel::Mh(p) => {
                let out = mh_step(&current_theta, current_value, &mut target, p, &mut state_rng)
                    .map_err(step)?;
                out.state
            }
            StateKernel::Slice(spec) => {
                let out = slice_step(&current_theta, current_value, &mut target, spec, &mut state_rng)
                    .map_err(step)?;
                diag.slice_shrink_failures += out.shrink_failures;
                out.state
            }
            StateKernel::Ess(chol) => {
                let out = ess_step(&current_theta, current_value, &mut target, chol, &mut state_rng)
                    .map_err(step)?;
                out.state
            }
        };
        if new_state != current_theta {
            let pos = evaluated
                .iter()
                .rposition(|(c, _)| c.theta() == new_state.as_slice())
                .expect("accepted state was evaluated");
            let (c, est) = evaluated.swap_remove(pos);
            cache = c;
            estimate = est;
            diag.theta_accepted += 1;
        }

        sink(&ChainSample {
            iter,
            k,
            sign: estimate.sign(),
            cum_cost: ledger,
            theta: new_state,
        });
    }
    Ok((diag, ledger))
}

fn wrap(iteration: usize, e: Error) -> Error {
    Error::Chain {
        iteration,
        source: Box::new(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain::{burn_thin, coordinate_moments, mean_fidelity};
    use crate::estimator::FreshCursor;
    use crate::models::toy::ToyModel;
    use std::cell::Cell;

    /// `L_k(theta) = N(theta; 1, 0.5)` for every k, with cost k per level and
    /// an independent tally of every charge.
    struct Flat {
        charged: Cell<f64>,
    }

    impl Flat {
        fn new() -> Self {
            Self {
                charged: Cell::new(0.0),
            }
        }
        fn value(theta: &[f64]) -> f64 {
            -(theta[0] - 1.0).powi(2)
        }
    }

    impl TargetSequence for Flat {
        type Cursor = FreshCursor;
        fn dim(&self) -> usize {
            1
        }
        fn log_prior(&self, theta: &[f64]) -> f64 {
            -0.5 * theta[0] * theta[0]
        }
        fn start(&self, theta: &[f64], k: usize) -> Result<(FreshCursor, f64)> {
            self.charged.set(self.charged.get() + self.fresh_cost(k));
            Ok((FreshCursor::new(theta, k), Self::value(theta)))
        }
        fn advance(&self, c: &mut FreshCursor) -> Result<f64> {
            c.level += 1;
            self.charged.set(self.charged.get() + self.level_cost(c.level));
            Ok(Self::value(&c.theta))
        }
        fn level_cost(&self, k: usize) -> f64 {
            k as f64
        }
    }

    fn config(mode: FidelityMode, kernel: StateKernel, iterations: usize) -> ChainConfig {
        ChainConfig {
            iterations,
            seed: 42,
            chain_id: 0,
            mode,
            kernel,
            initial_theta: vec![0.0],
            initial_k: None,
        }
    }

    fn multi(gamma0: f64) -> FidelityMode {
        FidelityMode::Multi {
            dist: TruncationDistribution::geometric(gamma0).unwrap(),
            scheme: EstimatorScheme::RussianRoulette,
        }
    }

    #[test]
    fn constant_sequence_matches_single_fidelity_trace() {
        let kernel = StateKernel::Mh(ProposalSpec::GaussianRandomWalk { scale: 0.7 });
        let mf = run_chain(&mut Flat::new(), &config(multi(0.2), kernel.clone(), 3000)).unwrap();
        let sf = run_chain(&mut Flat::new(), &config(FidelityMode::Single { k: 1 }, kernel, 3000))
            .unwrap();
        for (a, b) in mf.samples.iter().zip(&sf.samples) {
            assert_eq!(a.theta, b.theta);
        }
    }

    #[test]
    fn constant_sequence_fidelity_mean() {
        let kernel = StateKernel::Mh(ProposalSpec::GaussianRandomWalk { scale: 0.7 });
        let run = run_chain(&mut Flat::new(), &config(multi(0.1), kernel, 200_000)).unwrap();
        let ks: Vec<f64> = run.samples.iter().map(|s| s.k as f64).collect();
        let mean = mean_fidelity(&run.samples);
        // batch means for the autocorrelated K chain
        let b = 100;
        let size = ks.len() / b;
        let batch: Vec<f64> = ks.chunks(size).map(|c| c.iter().sum::<f64>() / c.len() as f64).collect();
        let bm = batch.iter().sum::<f64>() / b as f64;
        let se = (batch.iter().map(|x| (x - bm).powi(2)).sum::<f64>() / (b - 1) as f64 / b as f64).sqrt();
        assert!((mean - 10.0).abs() < 3.0 * se, "mean K {mean}, se {se}");
    }

    #[test]
    fn ledger_matches_independent_tally() {
        for kernel in [
            StateKernel::Mh(ProposalSpec::GaussianRandomWalk { scale: 0.5 }),
            StateKernel::Slice(SliceSpec::new(1.0)),
        ] {
            let mut seq = Flat::new();
            let run = run_chain(&mut seq, &config(multi(0.3), kernel, 500)).unwrap();
            assert_eq!(run.total_cost, seq.charged.get());
            assert_eq!(run.samples.last().unwrap().cum_cost, run.total_cost);
            assert!(run.samples.windows(2).all(|w| w[0].cum_cost <= w[1].cum_cost));
        }
    }

    #[test]
    fn deterministic_given_seed() {
        let toy = ToyModel::new(vec![0.3, -0.5, 1.2]);
        let kernel = StateKernel::Slice(SliceSpec::new(1.0));
        let a = run_chain(&mut toy.clone(), &config(multi(0.3), kernel.clone(), 300)).unwrap();
        let b = run_chain(&mut toy.clone(), &config(multi(0.3), kernel, 300)).unwrap();
        assert_eq!(a.samples, b.samples);
    }

    #[test]
    fn ess_kernel_on_flat_sequence() {
        // N(0, 1) prior times exp(-(t - 1)^2): posterior N(2/3, 1/3)
        let prior = Arc::new(crate::numerics::cholesky(&nalgebra::DMatrix::identity(1, 1)).unwrap());
        let run = run_chain(
            &mut Flat::new(),
            &config(multi(0.3), StateKernel::Ess(prior), 40_000),
        )
        .unwrap();
        let kept = burn_thin(&run.samples, 1000, 2);
        let (mean, sd) = coordinate_moments(&kept, 0).unwrap();
        assert!((mean - 2.0 / 3.0).abs() < 0.03, "{mean}");
        assert!((sd - (1.0f64 / 3.0).sqrt()).abs() < 0.03, "{sd}");
    }

    #[test]
    fn toy_posterior_small_data() {
        let toy = ToyModel::new(vec![0.3, -0.5, 1.2]);
        let (mean, var) = toy.posterior();
        let kernel = StateKernel::Mh(ProposalSpec::GaussianRandomWalk { scale: 1.0 });
        let run = run_chain(&mut toy.clone(), &config(multi(0.2), kernel, 60_000)).unwrap();
        let kept = burn_thin(&run.samples, 2000, 2);
        let (m, sd) = coordinate_moments(&kept, 0).unwrap();
        assert!((m - mean).abs() < 0.05, "{m} vs {mean}");
        assert!((sd / var.sqrt() - 1.0).abs() < 0.05, "{sd} vs {}", var.sqrt());
    }

    #[test]
    fn errors_carry_iteration() {
        struct Breaks;
        impl TargetSequence for Breaks {
            type Cursor = FreshCursor;
            fn dim(&self) -> usize {
                1
            }
            fn start(&self, theta: &[f64], k: usize) -> Result<(FreshCursor, f64)> {
                Ok((FreshCursor::new(theta, k), if theta[0] > 3.0 { f64::NAN } else { 0.0 }))
            }
            fn advance(&self, c: &mut FreshCursor) -> Result<f64> {
                c.level += 1;
                Ok(if c.theta[0] > 3.0 { f64::NAN } else { 0.0 })
            }
            fn level_cost(&self, _: usize) -> f64 {
                1.0
            }
        }
        let kernel = StateKernel::Mh(ProposalSpec::GaussianRandomWalk { scale: 5.0 });
        let err = run_chain(&mut Breaks, &config(FidelityMode::Single { k: 1 }, kernel, 1000))
            .unwrap_err();
        assert!(matches!(err, Error::Chain { .. }));
    }
}
