//! Experiment configuration in TOML.
//!
//! ```toml
//! experiment = "toy"
//! seed = 7
//! chains = 4
//! iterations = 10000
//! burn_in = 2000
//!
//! [sampler]
//! kind = "mh"
//! proposal = { kind = "gaussian-random-walk", scale = 0.15 }
//!
//! [mode]
//! kind = "multi-fidelity"
//! gamma0 = 0.3
//! ```
//!
//! Missing `sampler` and `mode` blocks are filled with per-experiment
//! defaults by [`ExperimentConfig::resolve`].

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::gp::CgPreconditioning;
use crate::models::heat::Stencil;
use crate::numerics::OdeMethod;
use crate::samplers::{AnnealSchedule, ProposalSpec, SliceSpec};
use crate::truncation::{EstimatorScheme, TruncationDistribution, DEFAULT_K_MAX};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Toy,
    Lgcp,
    Lv,
    Pde,
    Gp,
    EstimatorCheck,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::Toy => "toy",
            Experiment::Lgcp => "lgcp",
            Experiment::Lv => "lv",
            Experiment::Pde => "pde",
            Experiment::Gp => "gp",
            Experiment::EstimatorCheck => "estimator-check",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SamplerConfig {
    Mh {
        proposal: ProposalSpec,
    },
    Slice {
        width: f64,
        #[serde(default = "default_max_stepout")]
        max_stepout: usize,
        #[serde(default = "default_max_shrink")]
        max_shrink: usize,
    },
    Ess,
    TwoStage {
        proposal: ProposalSpec,
    },
    Sa {
        proposal: ProposalSpec,
        #[serde(default)]
        schedule: AnnealSchedule,
    },
}

impl SamplerConfig {
    fn name(&self) -> &'static str {
        match self {
            SamplerConfig::Mh { .. } => "mh",
            SamplerConfig::Slice { .. } => "slice",
            SamplerConfig::Ess => "ess",
            SamplerConfig::TwoStage { .. } => "two-stage",
            SamplerConfig::Sa { .. } => "sa",
        }
    }

    pub fn slice_spec(&self) -> Option<SliceSpec> {
        match *self {
            SamplerConfig::Slice {
                width,
                max_stepout,
                max_shrink,
            } => Some(SliceSpec {
                width,
                max_stepout,
                max_shrink,
            }),
            _ => None,
        }
    }
}

fn default_max_stepout() -> usize {
    SliceSpec::new(1.0).max_stepout
}

fn default_max_shrink() -> usize {
    SliceSpec::new(1.0).max_shrink
}

fn default_scheme() -> EstimatorScheme {
    EstimatorScheme::RussianRoulette
}

fn default_k_max() -> usize {
    DEFAULT_K_MAX
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ModeConfig {
    MultiFidelity {
        gamma0: f64,
        #[serde(default = "default_scheme")]
        scheme: EstimatorScheme,
        #[serde(default = "default_k_max")]
        k_max: usize,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial_k: Option<usize>,
    },
    SingleFidelity {
        k: usize,
    },
    TwoStage {
        k_hf: usize,
        k_lf: usize,
    },
}

impl ModeConfig {
    fn name(&self) -> &'static str {
        match self {
            ModeConfig::MultiFidelity { .. } => "multi-fidelity",
            ModeConfig::SingleFidelity { .. } => "single-fidelity",
            ModeConfig::TwoStage { .. } => "two-stage",
        }
    }

    pub fn multi(gamma0: f64) -> Self {
        ModeConfig::MultiFidelity {
            gamma0,
            scheme: default_scheme(),
            k_max: default_k_max(),
            initial_k: None,
        }
    }

    /// Truncation distribution of a multi-fidelity mode.
    pub fn truncation(&self) -> Result<Option<TruncationDistribution>> {
        match *self {
            ModeConfig::MultiFidelity { gamma0, k_max, .. } => {
                TruncationDistribution::geometric_with_cap(gamma0, k_max).map(Some)
            }
            _ => Ok(None),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToyConfig {
    /// Synthetic dataset size, used when `data` is absent.
    pub n: usize,
    /// Seed of the synthetic dataset; the run seed when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<Vec<f64>>,
}

impl Default for ToyConfig {
    fn default() -> Self {
        Self {
            n: 200,
            data_seed: None,
            data: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LgcpConfig {
    /// Event file, one decimal year per line; the bundled coal-mining
    /// disasters when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    pub domain: [f64; 2],
    pub lengthscale: f64,
    pub variance: f64,
    pub node_offset: usize,
    /// Time at which the posterior mean intensity is reported.
    pub target_time: f64,
}

impl Default for LgcpConfig {
    fn default() -> Self {
        Self {
            data: None,
            domain: [1851.0, 1963.0],
            lengthscale: 20.0,
            variance: 1.0,
            node_offset: 10,
            target_time: 1862.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LvConfig {
    /// `year,hare,lynx` file; the bundled 1900-1920 series when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    /// Fit synthetic data instead of a file.
    pub synthetic: bool,
    pub method: OdeMethod,
    /// Likelihood noise scale on the log populations.
    pub sigma: f64,
    pub synthetic_params: [f64; 4],
    pub synthetic_initial: [f64; 2],
    pub synthetic_noise: f64,
    pub synthetic_points: usize,
    pub synthetic_spacing: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
}

impl Default for LvConfig {
    fn default() -> Self {
        Self {
            data: None,
            synthetic: false,
            method: OdeMethod::Rk4,
            sigma: 0.25,
            synthetic_params: [1.5, 1.0, 3.0, 1.0],
            synthetic_initial: [1.0, 1.0],
            synthetic_noise: 0.8,
            synthetic_points: 200,
            synthetic_spacing: 0.05,
            data_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    pub alpha0: f64,
    pub beta0: f64,
    /// Spacing of the solve that defines the target field.
    pub reference_dx: f64,
    pub stencil: Stencil,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self {
            alpha0: 0.85,
            beta0: 0.21,
            reference_dx: 5e-3,
            stencil: Stencil::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GpConfig {
    pub n: usize,
    /// Inputs are uniform on `[0, span]`.
    pub span: f64,
    pub true_lengthscale: f64,
    pub noise_var: f64,
    /// Extra CG iterations at every fidelity.
    pub cg_offset: usize,
    pub preconditioning: CgPreconditioning,
    pub prior_log_mean: f64,
    pub prior_log_var: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_seed: Option<u64>,
}

impl Default for GpConfig {
    fn default() -> Self {
        Self {
            n: 100,
            span: 500.0,
            true_lengthscale: 45.0,
            noise_var: 1.0,
            cg_offset: 4,
            preconditioning: CgPreconditioning::None,
            prior_log_mean: 3.8,
            prior_log_var: 0.03,
            data_seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorCheckConfig {
    pub thetas: Vec<f64>,
    pub gamma0: f64,
    pub scheme: EstimatorScheme,
    pub replicates: usize,
    /// Toy dataset whose likelihood is estimated.
    pub data: Vec<f64>,
    /// Pass threshold in standard errors.
    pub z: f64,
}

impl Default for EstimatorCheckConfig {
    fn default() -> Self {
        Self {
            thetas: vec![-1.0, 0.5, 2.0],
            gamma0: 0.1,
            scheme: EstimatorScheme::RussianRoulette,
            replicates: 100_000,
            data: vec![0.3, -0.5, 1.2],
            z: 4.0,
        }
    }
}

fn default_chains() -> i64 {
    4
}

fn default_iterations() -> i64 {
    10_000
}

fn default_burn_in() -> i64 {
    2_000
}

fn default_thin() -> i64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default = "default_chains")]
    pub chains: i64,
    #[serde(default = "default_iterations")]
    pub iterations: i64,
    #[serde(default = "default_burn_in")]
    pub burn_in: i64,
    #[serde(default = "default_thin")]
    pub thin: i64,
    /// Starting state shared by all chains; drawn from the prior per chain
    /// when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sampler: Option<SamplerConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<ModeConfig>,
    #[serde(default)]
    pub toy: ToyConfig,
    #[serde(default)]
    pub lgcp: LgcpConfig,
    #[serde(default)]
    pub lv: LvConfig,
    #[serde(default)]
    pub pde: PdeConfig,
    #[serde(default)]
    pub gp: GpConfig,
    #[serde(default)]
    pub estimator_check: EstimatorCheckConfig,
}

impl ExperimentConfig {
    /// Defaults for everything except the experiment itself.
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            seed: None,
            chains: default_chains(),
            iterations: default_iterations(),
            burn_in: default_burn_in(),
            thin: default_thin(),
            initial_theta: None,
            sampler: None,
            mode: None,
            toy: ToyConfig::default(),
            lgcp: LgcpConfig::default(),
            lv: LvConfig::default(),
            pde: PdeConfig::default(),
            gp: GpConfig::default(),
            estimator_check: EstimatorCheckConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads, parses and validates a config file. Relative data paths are
    /// taken relative to the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_toml_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for data in [&mut cfg.lgcp.data, &mut cfg.lv.data].into_iter().flatten() {
            if data.is_relative() {
                *data = base.join(&*data);
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn chains(&self) -> usize {
        self.chains.max(0) as usize
    }

    pub fn iterations(&self) -> usize {
        self.iterations.max(0) as usize
    }

    pub fn burn_in(&self) -> usize {
        self.burn_in.max(0) as usize
    }

    pub fn thin(&self) -> usize {
        self.thin.max(1) as usize
    }

    /// Fills the sampler and mode blocks with the experiment's defaults.
    pub fn resolve(&mut self) {
        let (sampler, mode) = match self.experiment {
            Experiment::Toy => (
                SamplerConfig::Mh {
                    proposal: ProposalSpec::GaussianRandomWalk { scale: 0.15 },
                },
                ModeConfig::MultiFidelity {
                    gamma0: 0.3,
                    scheme: EstimatorScheme::SingleTerm,
                    k_max: default_k_max(),
                    initial_k: None,
                },
            ),
            Experiment::Lgcp => (SamplerConfig::Ess, ModeConfig::multi(0.08)),
            Experiment::Lv => (SamplerConfig::Ess, ModeConfig::multi(0.12)),
            Experiment::Pde => (
                SamplerConfig::Sa {
                    proposal: ProposalSpec::TruncatedNormal { scale: 0.3 },
                    schedule: AnnealSchedule::default(),
                },
                ModeConfig::multi(0.25),
            ),
            Experiment::Gp => (
                SamplerConfig::Mh {
                    proposal: ProposalSpec::GaussianRandomWalk { scale: 8.0 },
                },
                ModeConfig::multi(0.1),
            ),
            Experiment::EstimatorCheck => return,
        };
        self.sampler.get_or_insert(sampler);
        self.mode.get_or_insert(mode);
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.chains < 1 {
            return bad(format!("chains must be at least 1, got {}", self.chains));
        }
        if self.iterations < 1 {
            return bad(format!("iterations must be at least 1, got {}", self.iterations));
        }
        if self.burn_in < 0 || self.burn_in > self.iterations {
            return bad(format!(
                "burn_in must lie in 0..=iterations, got {}",
                self.burn_in
            ));
        }
        if self.thin < 1 {
            return bad(format!("thin must be at least 1, got {}", self.thin));
        }
        if let Some(sampler) = &self.sampler {
            match sampler {
                SamplerConfig::Mh { proposal }
                | SamplerConfig::TwoStage { proposal }
                | SamplerConfig::Sa { proposal, .. } => proposal
                    .validate()
                    .map_err(|e| Error::Config(format!("sampler.proposal: {e}")))?,
                SamplerConfig::Slice { .. } => sampler
                    .slice_spec()
                    .expect("slice sampler")
                    .validate()
                    .map_err(|e| Error::Config(format!("sampler: {e}")))?,
                SamplerConfig::Ess => {}
            }
            if let SamplerConfig::Sa { schedule, .. } = sampler {
                schedule
                    .validate()
                    .map_err(|e| Error::Config(format!("sampler.schedule: {e}")))?;
            }
        }
        if let Some(mode) = &self.mode {
            mode.truncation()
                .map_err(|e| Error::Config(format!("mode: {e}")))?;
            match *mode {
                ModeConfig::SingleFidelity { k } if k < 1 => {
                    return bad("mode.k must be at least 1".into());
                }
                ModeConfig::TwoStage { k_hf, k_lf } if k_hf < 1 || k_lf < 1 => {
                    return bad("mode.k_hf and mode.k_lf must be at least 1".into());
                }
                ModeConfig::MultiFidelity {
                    initial_k: Some(k), k_max, ..
                } if k < 1 || k > k_max => {
                    return bad(format!("mode.initial_k must lie in 1..={k_max}, got {k}"));
                }
                _ => {}
            }
        }
        let sampler = self.sampler.as_ref().map(SamplerConfig::name);
        let mode = self.mode.as_ref().map(ModeConfig::name);
        if (sampler == Some("two-stage")) != (mode == Some("two-stage")) && sampler.is_some() && mode.is_some() {
            return bad(format!(
                "sampler {} does not match mode {}; two-stage needs both",
                sampler.unwrap_or("-"),
                mode.unwrap_or("-")
            ));
        }
        match (self.experiment, sampler) {
            (Experiment::Pde, Some(s)) if s != "sa" => {
                return bad(format!("the pde experiment needs sampler sa, got {s}"));
            }
            (e, Some("sa")) if e != Experiment::Pde => {
                return bad(format!("sampler sa only applies to pde, not {}", e.name()));
            }
            (e, Some("ess")) if !matches!(e, Experiment::Lgcp | Experiment::Lv) => {
                return bad(format!(
                    "sampler ess needs a Gaussian prior (lgcp or lv), not {}",
                    e.name()
                ));
            }
            (Experiment::Pde, _) if mode == Some("two-stage") => {
                return bad("the pde experiment has no two-stage mode".into());
            }
            _ => {}
        }
        if let Some(theta) = &self.initial_theta {
            if theta.iter().any(|x| !x.is_finite()) {
                return bad("initial_theta must be finite".into());
            }
        }
        let ec = &self.estimator_check;
        if self.experiment == Experiment::EstimatorCheck {
            if !(ec.gamma0 > 0.0 && ec.gamma0 < 1.0) {
                return bad(format!("estimator_check.gamma0 must lie in (0, 1), got {}", ec.gamma0));
            }
            if ec.replicates < 2 || ec.thetas.is_empty() {
                return bad("estimator_check needs thetas and at least 2 replicates".into());
            }
        }
        if self.experiment == Experiment::Pde && !(self.pde.reference_dx > 0.0) {
            return bad("pde.reference_dx must be positive".into());
        }
        if self.experiment == Experiment::Gp && (self.gp.n == 0 || !(self.gp.noise_var > 0.0)) {
            return bad("gp.n and gp.noise_var must be positive".into());
        }
        if self.experiment == Experiment::Lv && !(self.lv.sigma > 0.0) {
            return bad("lv.sigma must be positive".into());
        }
        Ok(())
    }
}
