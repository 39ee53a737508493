//! Chain drivers and the post-processing of their output.
//!
//! Samples carry the sign of the density estimate at their state. Expectations
//! are ratio estimates `sum(sign * h) / sum(sign)`; zero-sign samples drop out
//! of both sums.

mod anneal;
mod cache;
mod driver;
mod two_stage;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::signed_log::Sign;

pub use anneal::{run_annealing, AnnealConfig, AnnealMode, AnnealRun, EnergySequence};
pub use driver::{run_chain, run_chain_with, ChainConfig, ChainDiagnostics, ChainRun, FidelityMode, StateKernel};
pub use two_stage::{run_two_stage_chain, TwoStageConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct ChainSample {
    pub iter: usize,
    pub k: usize,
    pub sign: Sign,
    /// Cost of every level evaluation made up to and including this iteration.
    pub cum_cost: f64,
    pub theta: Vec<f64>,
}

/// The two independent generators of one chain: fidelity and auxiliary
/// updates draw from the first, state updates from the second.
pub fn chain_rngs(seed: u64, chain_id: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut aux = ChaCha8Rng::seed_from_u64(seed);
    aux.set_stream(2 * chain_id);
    let mut state = ChaCha8Rng::seed_from_u64(seed);
    state.set_stream(2 * chain_id + 1);
    (aux, state)
}

/// Keeps indices `burn_in + i * thin`.
pub fn burn_thin(samples: &[ChainSample], burn_in: usize, thin: usize) -> Vec<ChainSample> {
    let thin = thin.max(1);
    samples.iter().skip(burn_in).step_by(thin).cloned().collect()
}

pub fn sign_corrected_estimate<H>(samples: &[ChainSample], mut h: H) -> Result<f64>
where
    H: FnMut(&[f64]) -> f64,
{
    let mut num = 0.0;
    let mut den = 0.0;
    for s in samples {
        let sigma = s.sign.as_f64();
        if sigma != 0.0 {
            num += sigma * h(&s.theta);
            den += sigma;
        }
    }
    if den == 0.0 {
        return Err(Error::ZeroSignSum);
    }
    Ok(num / den)
}

pub fn negative_sign_fraction(samples: &[ChainSample]) -> f64 {
    if samples.is_empty() {
        return 0.0;
    }
    let neg = samples.iter().filter(|s| s.sign == Sign::Negative).count();
    neg as f64 / samples.len() as f64
}

pub fn mean_fidelity(samples: &[ChainSample]) -> f64 {
    if samples.is_empty() {
        return f64::NAN;
    }
    samples.iter().map(|s| s.k as f64).sum::<f64>() / samples.len() as f64
}

/// `(cum_cost, estimate over the prefix)` for each prefix with a nonzero sign
/// sum.
pub fn running_functional<H>(samples: &[ChainSample], mut h: H) -> Vec<(f64, f64)>
where
    H: FnMut(&[f64]) -> f64,
{
    let mut out = Vec::with_capacity(samples.len());
    let mut num = 0.0;
    let mut den = 0.0;
    for s in samples {
        let sigma = s.sign.as_f64();
        if sigma != 0.0 {
            num += sigma * h(&s.theta);
            den += sigma;
        }
        if den != 0.0 {
            out.push((s.cum_cost, num / den));
        }
    }
    out
}

/// Sign-corrected posterior mean and standard deviation of one coordinate.
pub fn coordinate_moments(samples: &[ChainSample], dim: usize) -> Result<(f64, f64)> {
    let m1 = sign_corrected_estimate(samples, |t| t[dim])?;
    let m2 = sign_corrected_estimate(samples, |t| t[dim] * t[dim])?;
    Ok((m1, (m2 - m1 * m1).max(0.0).sqrt()))
}

/// Batch-means Monte Carlo standard error of the sign-corrected estimate of
/// `h` pooled over several chains. Each chain is cut into `batches_per_chain`
/// contiguous batches; the spread of the per-batch estimates gives the SE.
pub fn batch_means_se<H>(chains: &[Vec<ChainSample>], batches_per_chain: usize, mut h: H) -> Result<f64>
where
    H: FnMut(&[f64]) -> f64,
{
    let mut estimates = Vec::new();
    for chain in chains {
        let size = chain.len() / batches_per_chain.max(1);
        if size == 0 {
            continue;
        }
        for b in chain.chunks_exact(size).take(batches_per_chain) {
            estimates.push(sign_corrected_estimate(b, &mut h)?);
        }
    }
    let n = estimates.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "batch means need at least two batches".into(),
        ));
    }
    let mean = estimates.iter().sum::<f64>() / n as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    Ok((var / n as f64).sqrt())
}
