use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfmc::checks::{all_passed, convergence_check, estimator_check, CheckOutcome};
use mfmc::experiments::{run_experiment, RunOptions};
use mfmc::io::config::{Experiment, ExperimentConfig};
use mfmc::io::output::write_json;
use mfmc::{Error, Result};

/// Multi-fidelity MCMC experiments.
#[derive(Parser)]
#[command(name = "mfmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Conjugate Gaussian toy problem.
    Toy(RunArgs),
    /// Log-Gaussian Cox process on the coal-mining disasters.
    Lgcp(RunArgs),
    /// Lotka-Volterra parameter inference.
    Lv(RunArgs),
    /// Heat-equation parameter recovery by simulated annealing.
    Pde(RunArgs),
    /// GP lengthscale inference with truncated conjugate gradients.
    Gp(RunArgs),
    /// Statistical unbiasedness test of the estimator.
    EstimatorCheck(RunArgs),
    /// Convergence orders of the numerical solvers.
    ConvergenceCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to `results/<command>`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides the number of chains.
    #[arg(long)]
    chains: Option<usize>,
}

fn load(experiment: Experiment, args: &RunArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::new(experiment),
    };
    if cfg.experiment != experiment {
        return Err(Error::Config(format!(
            "config is for experiment {}, but the command is {}",
            cfg.experiment.name(),
            experiment.name()
        )));
    }
    if let Some(seed) = args.seed {
        cfg.seed = Some(seed);
    }
    if let Some(chains) = args.chains {
        cfg.chains = chains as i64;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("MFMC_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|n| *n > 0)
            .map(Some)
            .ok_or_else(|| Error::Config(format!("MFMC_THREADS must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn out_dir(args: &RunArgs, name: &str) -> PathBuf {
    args.out.clone().unwrap_or_else(|| PathBuf::from("results").join(name))
}

fn report(checks: &[CheckOutcome]) -> bool {
    for c in checks {
        println!("[{}] {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
    }
    all_passed(checks)
}

fn run(command: Command) -> Result<bool> {
    let (experiment, args) = match command {
        Command::Toy(a) => (Experiment::Toy, a),
        Command::Lgcp(a) => (Experiment::Lgcp, a),
        Command::Lv(a) => (Experiment::Lv, a),
        Command::Pde(a) => (Experiment::Pde, a),
        Command::Gp(a) => (Experiment::Gp, a),
        Command::EstimatorCheck(args) => {
            let cfg = load(Experiment::EstimatorCheck, &args)?;
            let seed = cfg.seed.unwrap_or(0);
            let checks = estimator_check(&cfg.estimator_check, seed)?;
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                write_json(&dir.join("checks.json"), &checks)?;
            }
            return Ok(report(&checks));
        }
        Command::ConvergenceCheck(args) => {
            let checks = convergence_check(args.seed.unwrap_or(0))?;
            if let Some(dir) = &args.out {
                std::fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.clone(), source: e })?;
                write_json(&dir.join("checks.json"), &checks)?;
            }
            return Ok(report(&checks));
        }
    };
    let cfg = load(experiment, &args)?;
    let opts = RunOptions {
        out_dir: out_dir(&args, experiment.name()),
        threads: threads()?,
    };
    let summary = run_experiment(&cfg, &opts)?;
    for w in &summary.warnings {
        eprintln!("warning: {w}");
    }
    let p = &summary.pooled;
    println!(
        "{}: {} chains, pooled mean {:?}, sd {:?}, mean K {:.3}, negative signs {:.4}, total cost {:.4e}",
        experiment.name(),
        summary.chains.len(),
        p.mean,
        p.sd,
        p.mean_k,
        p.negative_sign_fraction,
        p.total_cost
    );
    for (name, v) in &p.functionals {
        println!("  {name} = {v:?}");
    }
    println!("wrote {}", opts.out_dir.join("summary.json").display());
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
