//! Runs a configured experiment: builds the model, runs the chains in
//! parallel, writes one samples file per chain and a summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::chain::{
    batch_means_se, burn_thin, coordinate_moments, mean_fidelity, negative_sign_fraction,
    run_annealing, run_chain, run_two_stage_chain, sign_corrected_estimate, AnnealConfig,
    AnnealMode, ChainConfig, ChainDiagnostics, ChainRun, ChainSample, FidelityMode, StateKernel,
    TwoStageConfig,
};
use crate::error::{Error, Result};
use crate::estimator::TargetSequence;
use crate::io::config::{Experiment, ExperimentConfig, ModeConfig, SamplerConfig};
use crate::io::data::{self, COAL_EVENTS, LYNX_HARE_ROWS};
use crate::io::output::{write_json, write_samples};
use crate::models::gp::GpModel;
use crate::models::heat::HeatProblem;
use crate::models::lgcp::{LgcpModel, LgcpParams};
use crate::models::lotka_volterra::{LvModel, PRIOR_MEAN, PRIOR_VAR};
use crate::models::toy::ToyModel;
use crate::numerics::{mvn_sample, CholeskyFactor};

/// Stream offsets that keep auxiliary draws apart from the chain streams.
const INIT_STREAM: u64 = 1 << 40;
const DATA_STREAM: u64 = 1 << 41;

/// Per-chain sub-streams of the run seed for drawing initial states.
pub fn init_rng(seed: u64, chain_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(INIT_STREAM + chain_id);
    rng
}

pub fn data_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(DATA_STREAM);
    rng
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub out_dir: PathBuf,
    /// Upper bound on chains run at once.
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnnealReport {
    pub best_theta: Vec<f64>,
    pub best_energy: f64,
    pub best_k: usize,
    pub final_theta: Vec<f64>,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub chain_id: u64,
    pub samples_file: String,
    pub kept_samples: usize,
    pub mean: Vec<Option<f64>>,
    pub sd: Vec<Option<f64>>,
    pub functionals: BTreeMap<String, Option<f64>>,
    pub negative_sign_fraction: f64,
    pub mean_k: f64,
    pub total_cost: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostics: Option<ChainDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anneal: Option<AnnealReport>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PooledReport {
    pub kept_samples: usize,
    pub mean: Vec<Option<f64>>,
    pub sd: Vec<Option<f64>>,
    /// Batch-means standard error of each mean.
    pub mean_se: Vec<Option<f64>>,
    pub functionals: BTreeMap<String, Option<f64>>,
    pub functional_se: BTreeMap<String, Option<f64>>,
    pub negative_sign_fraction: f64,
    pub mean_k: f64,
    pub total_cost: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub experiment: Experiment,
    pub version: String,
    pub seed: u64,
    pub wallclock_seconds: f64,
    /// Known answers for the run, where they exist.
    pub reference: BTreeMap<String, Value>,
    pub warnings: Vec<String>,
    pub chains: Vec<ChainReport>,
    pub pooled: PooledReport,
    pub config: ExperimentConfig,
}

type Functional = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// A sampling target together with what the runner needs to report on it.
struct Target<S> {
    seq: S,
    /// Draws a starting state.
    init: Box<dyn Fn(&mut ChaCha8Rng) -> Vec<f64> + Send + Sync>,
    /// Gaussian prior for elliptical slice sampling.
    ess_prior: Option<Arc<CholeskyFactor>>,
    /// Maps sampler states to reported parameters.
    transform: fn(&[f64]) -> Vec<f64>,
    functionals: Vec<(String, Functional)>,
    reference: BTreeMap<String, Value>,
    warnings: Vec<String>,
}

fn identity(theta: &[f64]) -> Vec<f64> {
    theta.to_vec()
}

fn lv_transform(theta: &[f64]) -> Vec<f64> {
    LvModel::log_params(theta).to_vec()
}

pub fn resolve_seed(cfg: &ExperimentConfig) -> Result<u64> {
    cfg.seed
        .ok_or_else(|| Error::Config("seed is required (in the config or via --seed)".into()))
}

fn toy_target(cfg: &ExperimentConfig, seed: u64) -> Target<ToyModel> {
    let data = match &cfg.toy.data {
        Some(d) => d.clone(),
        None => ToyModel::synthetic(cfg.toy.n, &mut data_rng(cfg.toy.data_seed.unwrap_or(seed))).1,
    };
    let model = ToyModel::new(data);
    let (mean, var) = model.posterior();
    let (m1, v1) = model.posterior_at(1);
    let mut reference = BTreeMap::new();
    reference.insert("posterior_mean".into(), json!(mean));
    reference.insert("posterior_sd".into(), json!(var.sqrt()));
    reference.insert("posterior_mean_k1".into(), json!(m1));
    reference.insert("posterior_sd_k1".into(), json!(v1.sqrt()));
    Target {
        seq: model,
        init: Box::new(|rng| vec![rng.sample(StandardNormal)]),
        ess_prior: None,
        transform: identity,
        functionals: Vec::new(),
        reference,
        warnings: Vec::new(),
    }
}

fn lgcp_target(cfg: &ExperimentConfig) -> Result<Target<LgcpModel>> {
    let c = &cfg.lgcp;
    let mut warnings = Vec::new();
    let events = match &c.data {
        Some(p) => {
            let ev = data::load_coal(p)?;
            warnings.extend(data::count_warning(&p.display().to_string(), ev.len(), COAL_EVENTS));
            ev
        }
        None => data::bundled_coal(),
    };
    let model = LgcpModel::new(
        (c.domain[0], c.domain[1]),
        events,
        LgcpParams {
            lengthscale: c.lengthscale,
            variance: c.variance,
            node_offset: c.node_offset,
        },
    )?;
    let prior = model.prior();
    let init_prior = Arc::clone(&prior);
    let intensity: Functional = Arc::new(model.intensity_functional(c.target_time));
    Ok(Target {
        seq: model,
        init: Box::new(move |rng| mvn_sample(&init_prior, rng)),
        ess_prior: Some(prior),
        transform: identity,
        functionals: vec![(format!("intensity_at_{}", c.target_time), intensity)],
        reference: BTreeMap::new(),
        warnings,
    })
}

fn lv_target(cfg: &ExperimentConfig, seed: u64) -> Result<Target<LvModel>> {
    let c = &cfg.lv;
    let mut warnings = Vec::new();
    let mut reference = BTreeMap::new();
    let model = if c.synthetic {
        let times: Vec<f64> = (1..=c.synthetic_points)
            .map(|n| c.synthetic_spacing * n as f64)
            .collect();
        let mut rng = data_rng(c.data_seed.unwrap_or(seed));
        let obs = LvModel::synthetic(c.synthetic_params, c.synthetic_initial, &times, c.synthetic_noise, &mut rng)?;
        reference.insert(
            "log_params".into(),
            json!(c.synthetic_params.map(f64::ln)),
        );
        LvModel::new(0.0, c.synthetic_initial, times, obs, c.sigma, c.method)?
    } else {
        let lh = match &c.data {
            Some(p) => {
                let lh = data::load_lynx_hare(p)?;
                warnings.extend(data::count_warning(&p.display().to_string(), lh.years.len(), LYNX_HARE_ROWS));
                lh
            }
            None => data::bundled_lynx_hare(),
        };
        // the first row is the known initial condition
        let obs = (1..lh.years.len()).map(|i| [lh.hare[i], lh.lynx[i]]).collect();
        LvModel::new(
            lh.years[0],
            [lh.hare[0], lh.lynx[0]],
            lh.years[1..].to_vec(),
            obs,
            c.sigma,
            c.method,
        )?
    };
    let prior = crate::numerics::cholesky(&nalgebra::DMatrix::from_diagonal_element(4, 4, PRIOR_VAR))?;
    let sd = PRIOR_VAR.sqrt();
    let functionals: Vec<(String, Functional)> = ["alpha", "beta", "gamma", "delta"]
        .iter()
        .enumerate()
        .map(|(i, name)| {
            let f: Functional = Arc::new(move |t: &[f64]| (t[i] + PRIOR_MEAN[i]).exp());
            (name.to_string(), f)
        })
        .collect();
    Ok(Target {
        seq: model,
        init: Box::new(move |rng| (0..4).map(|_| sd * rng.sample::<f64, _>(StandardNormal)).collect()),
        ess_prior: Some(Arc::new(prior)),
        transform: lv_transform,
        functionals,
        reference,
        warnings,
    })
}

fn gp_target(cfg: &ExperimentConfig, seed: u64) -> Result<Target<GpModel>> {
    let c = &cfg.gp;
    let mut rng = data_rng(c.data_seed.unwrap_or(seed));
    let (x, y) = GpModel::synthetic(c.n, c.span, c.true_lengthscale, c.noise_var, &mut rng)?;
    let model = GpModel::new(x, y, c.noise_var, c.cg_offset)?.with_prior(c.prior_log_mean, c.prior_log_var)
        .with_preconditioning(c.preconditioning);
    let mut reference = BTreeMap::new();
    reference.insert("true_lengthscale".into(), json!(c.true_lengthscale));
    let (m, v) = (c.prior_log_mean, c.prior_log_var);
    Ok(Target {
        seq: model,
        init: Box::new(move |rng| vec![(m + v.sqrt() * rng.sample::<f64, _>(StandardNormal)).exp()]),
        ess_prior: None,
        transform: identity,
        functionals: Vec::new(),
        reference,
        warnings: Vec::new(),
    })
}

fn thread_pool(threads: Option<usize>, chains: usize) -> Result<rayon::ThreadPool> {
    let n = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    rayon::ThreadPoolBuilder::new()
        .num_threads(n.clamp(1, chains.max(1)))
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

/// Runs every chain of a sampling experiment.
fn run_sampling_chains<S>(target: &Target<S>, cfg: &ExperimentConfig, seed: u64, pool: &rayon::ThreadPool) -> Result<Vec<ChainRun>>
where
    S: TargetSequence + Clone + Send + Sync,
{
    let sampler = cfg.sampler.as_ref().expect("resolved config");
    let mode = cfg.mode.as_ref().expect("resolved config");
    let dim = target.seq.dim();
    let start = |chain_id: u64| -> Result<Vec<f64>> {
        match &cfg.initial_theta {
            Some(t) if t.len() != dim => Err(Error::Config(format!(
                "initial_theta has {} entries, the model has {dim}",
                t.len()
            ))),
            Some(t) => Ok(t.clone()),
            None => Ok((target.init)(&mut init_rng(seed, chain_id))),
        }
    };
    pool.install(|| {
        (0..cfg.chains() as u64)
            .into_par_iter()
            .map(|chain_id| -> Result<ChainRun> {
                let initial_theta = start(chain_id)?;
                let mut seq = target.seq.clone();
                if let (SamplerConfig::TwoStage { proposal }, ModeConfig::TwoStage { k_hf, k_lf }) = (sampler, mode) {
                    return run_two_stage_chain(
                        &seq,
                        &TwoStageConfig {
                            iterations: cfg.iterations(),
                            seed,
                            chain_id,
                            proposal: *proposal,
                            k_lf: *k_lf,
                            k_hf: *k_hf,
                            initial_theta,
                        },
                    );
                }
                let kernel = match sampler {
                    SamplerConfig::Mh { proposal } => StateKernel::Mh(*proposal),
                    SamplerConfig::Slice { .. } => StateKernel::Slice(sampler.slice_spec().expect("slice")),
                    SamplerConfig::Ess => StateKernel::Ess(
                        target
                            .ess_prior
                            .clone()
                            .ok_or_else(|| Error::Config("this model has no Gaussian prior for ess".into()))?,
                    ),
                    SamplerConfig::TwoStage { .. } | SamplerConfig::Sa { .. } => {
                        return Err(Error::Config("sampler does not fit a sampling experiment".into()));
                    }
                };
                let (fidelity, initial_k) = match *mode {
                    ModeConfig::MultiFidelity { scheme, initial_k, .. } => (
                        FidelityMode::Multi {
                            dist: mode.truncation()?.expect("multi-fidelity"),
                            scheme,
                        },
                        initial_k,
                    ),
                    ModeConfig::SingleFidelity { k } => (FidelityMode::Single { k }, None),
                    ModeConfig::TwoStage { .. } => {
                        return Err(Error::Config("two-stage mode needs the two-stage sampler".into()));
                    }
                };
                run_chain(
                    &mut seq,
                    &ChainConfig {
                        iterations: cfg.iterations(),
                        seed,
                        chain_id,
                        mode: fidelity,
                        kernel,
                        initial_theta,
                        initial_k,
                    },
                )
            })
            .collect()
    })
}

fn opt(r: Result<f64>) -> Option<f64> {
    r.ok().filter(|v| v.is_finite())
}

fn moments(samples: &[ChainSample], dim: usize) -> (Vec<Option<f64>>, Vec<Option<f64>>) {
    (0..dim)
        .map(|i| match coordinate_moments(samples, i) {
            Ok((m, s)) => (Some(m), Some(s)),
            Err(_) => (None, None),
        })
        .unzip()
}

/// Functionals act on sampler states, before any reporting transform.
fn functional_values(samples: &[ChainSample], functionals: &[(String, Functional)]) -> BTreeMap<String, Option<f64>> {
    functionals
        .iter()
        .map(|(name, f)| (name.clone(), opt(sign_corrected_estimate(samples, |t| f(t)))))
        .collect()
}

fn transform_samples(samples: &[ChainSample], transform: fn(&[f64]) -> Vec<f64>) -> Vec<ChainSample> {
    samples
        .iter()
        .map(|s| ChainSample {
            theta: transform(&s.theta),
            ..s.clone()
        })
        .collect()
}

fn batches_per_chain(kept: usize) -> usize {
    (kept / 50).clamp(2, 20)
}

fn summarize_sampling<S: TargetSequence>(
    target: &Target<S>,
    cfg: &ExperimentConfig,
    runs: &[ChainRun],
    out_dir: &Path,
) -> Result<(Vec<ChainReport>, PooledReport)> {
    let dim = target.seq.dim();
    let mut reports = Vec::new();
    let mut kept_raw = Vec::new();
    let mut kept_out = Vec::new();
    for (chain_id, run) in runs.iter().enumerate() {
        let out_samples = transform_samples(&run.samples, target.transform);
        let file = format!("samples_chain{chain_id}.csv");
        write_samples(&out_dir.join(&file), &out_samples, dim)?;
        let raw = burn_thin(&run.samples, cfg.burn_in(), cfg.thin());
        let kept = burn_thin(&out_samples, cfg.burn_in(), cfg.thin());
        let (mean, sd) = moments(&kept, dim);
        reports.push(ChainReport {
            chain_id: chain_id as u64,
            samples_file: file,
            kept_samples: kept.len(),
            mean,
            sd,
            functionals: functional_values(&raw, &target.functionals),
            negative_sign_fraction: negative_sign_fraction(&kept),
            mean_k: mean_fidelity(&kept),
            total_cost: run.total_cost,
            diagnostics: Some(run.diagnostics.clone()),
            anneal: None,
        });
        kept_raw.push(raw);
        kept_out.push(kept);
    }
    let all_out: Vec<ChainSample> = kept_out.iter().flatten().cloned().collect();
    let all_raw: Vec<ChainSample> = kept_raw.iter().flatten().cloned().collect();
    let (mean, sd) = moments(&all_out, dim);
    let nb = batches_per_chain(kept_out.first().map_or(0, Vec::len));
    let mean_se = (0..dim)
        .map(|i| opt(batch_means_se(&kept_out, nb, |t| t[i])))
        .collect();
    let functional_se = target
        .functionals
        .iter()
        .map(|(name, f)| (name.clone(), opt(batch_means_se(&kept_raw, nb, |t| f(t)))))
        .collect();
    let pooled = PooledReport {
        kept_samples: all_out.len(),
        mean,
        sd,
        mean_se,
        functionals: functional_values(&all_raw, &target.functionals),
        functional_se,
        negative_sign_fraction: negative_sign_fraction(&all_out),
        mean_k: mean_fidelity(&all_out),
        total_cost: runs.iter().map(|r| r.total_cost).sum(),
    };
    Ok((reports, pooled))
}

fn run_pde(cfg: &ExperimentConfig, seed: u64, pool: &rayon::ThreadPool, out_dir: &Path) -> Result<(Vec<ChainReport>, PooledReport, BTreeMap<String, Value>)> {
    let c = &cfg.pde;
    let problem = HeatProblem::new(c.alpha0, c.beta0, c.reference_dx, c.stencil)?;
    let Some(SamplerConfig::Sa { proposal, schedule }) = cfg.sampler else {
        return Err(Error::Config("the pde experiment needs sampler sa".into()));
    };
    let mode = match cfg.mode.as_ref().expect("resolved config") {
        m @ ModeConfig::MultiFidelity { .. } => AnnealMode::Multi(m.truncation()?.expect("multi-fidelity")),
        ModeConfig::SingleFidelity { k } => AnnealMode::Single(*k),
        ModeConfig::TwoStage { .. } => return Err(Error::Config("pde has no two-stage mode".into())),
    };
    let initial_k = match cfg.mode {
        Some(ModeConfig::MultiFidelity { initial_k, .. }) => initial_k,
        _ => None,
    };
    let initial_theta = cfg.initial_theta.clone().unwrap_or_else(|| vec![0.0, 0.0]);
    if initial_theta.len() != 2 {
        return Err(Error::Config("initial_theta for pde needs 2 entries".into()));
    }
    let runs: Vec<_> = pool.install(|| {
        (0..cfg.chains() as u64)
            .into_par_iter()
            .map(|chain_id| {
                run_annealing(
                    &problem,
                    &AnnealConfig {
                        iterations: cfg.iterations(),
                        seed,
                        chain_id,
                        schedule,
                        proposal,
                        mode,
                        initial_theta: initial_theta.clone(),
                        initial_k,
                    },
                )
            })
            .collect::<Result<_>>()
    })?;
    let mut reports = Vec::new();
    for (chain_id, run) in runs.iter().enumerate() {
        let file = format!("samples_chain{chain_id}.csv");
        write_samples(&out_dir.join(&file), &run.trace, 2)?;
        let final_theta = run.trace.last().map_or_else(|| initial_theta.clone(), |s| s.theta.clone());
        reports.push(ChainReport {
            chain_id: chain_id as u64,
            samples_file: file,
            kept_samples: run.trace.len(),
            mean: final_theta.iter().map(|v| Some(*v)).collect(),
            sd: vec![None, None],
            functionals: BTreeMap::new(),
            negative_sign_fraction: 0.0,
            mean_k: mean_fidelity(&run.trace),
            total_cost: run.total_cost,
            diagnostics: None,
            anneal: Some(AnnealReport {
                best_theta: run.best_theta.clone(),
                best_energy: run.best_energy,
                best_k: run.best_k,
                final_theta,
                evaluations: run.evaluations,
            }),
        });
    }
    let best = runs
        .iter()
        .min_by(|a, b| a.best_energy.total_cmp(&b.best_energy))
        .expect("at least one chain");
    let all: Vec<ChainSample> = runs.iter().flat_map(|r| r.trace.iter().cloned()).collect();
    let mut functionals = BTreeMap::new();
    functionals.insert("best_alpha".to_string(), Some(best.best_theta[0]));
    functionals.insert("best_beta".to_string(), Some(best.best_theta[1]));
    functionals.insert("best_energy".to_string(), Some(best.best_energy));
    let pooled = PooledReport {
        kept_samples: all.len(),
        mean: best.best_theta.iter().map(|v| Some(*v)).collect(),
        sd: vec![None, None],
        mean_se: vec![None, None],
        functionals,
        functional_se: BTreeMap::new(),
        negative_sign_fraction: 0.0,
        mean_k: mean_fidelity(&all),
        total_cost: runs.iter().map(|r| r.total_cost).sum(),
    };
    let mut reference = BTreeMap::new();
    reference.insert("alpha0".into(), json!(c.alpha0));
    reference.insert("beta0".into(), json!(c.beta0));
    Ok((reports, pooled, reference))
}

fn sampling_experiment<S>(
    target: Target<S>,
    cfg: &ExperimentConfig,
    seed: u64,
    pool: &rayon::ThreadPool,
    out_dir: &Path,
) -> Result<(Vec<ChainReport>, PooledReport, BTreeMap<String, Value>, Vec<String>)>
where
    S: TargetSequence + Clone + Send + Sync,
{
    let runs = run_sampling_chains(&target, cfg, seed, pool)?;
    let (chains, pooled) = summarize_sampling(&target, cfg, &runs, out_dir)?;
    Ok((chains, pooled, target.reference, target.warnings))
}

/// Runs a sampling or annealing experiment and writes
/// `samples_chain<i>.csv` and `summary.json` into `opts.out_dir`.
pub fn run_experiment(config: &ExperimentConfig, opts: &RunOptions) -> Result<RunSummary> {
    let mut cfg = config.clone();
    cfg.resolve();
    cfg.validate()?;
    let seed = resolve_seed(&cfg)?;
    std::fs::create_dir_all(&opts.out_dir).map_err(|e| Error::io(&opts.out_dir, e))?;
    let pool = thread_pool(opts.threads, cfg.chains())?;
    let clock = Instant::now();
    let out = opts.out_dir.as_path();
    let (chains, pooled, reference, warnings) = match cfg.experiment {
        Experiment::Toy => sampling_experiment(toy_target(&cfg, seed), &cfg, seed, &pool, out)?,
        Experiment::Lgcp => sampling_experiment(lgcp_target(&cfg)?, &cfg, seed, &pool, out)?,
        Experiment::Lv => sampling_experiment(lv_target(&cfg, seed)?, &cfg, seed, &pool, out)?,
        Experiment::Gp => sampling_experiment(gp_target(&cfg, seed)?, &cfg, seed, &pool, out)?,
        Experiment::Pde => {
            let (c, p, r) = run_pde(&cfg, seed, &pool, out)?;
            (c, p, r, Vec::new())
        }
        Experiment::EstimatorCheck => {
            return Err(Error::Config(
                "estimator-check is run by its own command, not as a sampling experiment".into(),
            ));
        }
    };
    let summary = RunSummary {
        experiment: cfg.experiment,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        wallclock_seconds: clock.elapsed().as_secs_f64(),
        reference,
        warnings,
        chains,
        pooled,
        config: cfg,
    };
    write_json(&out.join("summary.json"), &summary)?;
    Ok(summary)
}
