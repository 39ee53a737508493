//! Self-checks run by the `estimator-check` and `convergence-check` commands.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::Result;
use crate::estimator::estimate;
use crate::io::config::EstimatorCheckConfig;
use crate::models::heat::{analytic, heat_solve, Stencil, HORIZON};
use crate::models::toy::ToyModel;
use crate::numerics::{cg_solve, cholesky, ode_solve, trapezoid, Grid1D, OdeMethod, OdeOptions, Preconditioner};
use crate::truncation::TruncationDistribution;

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: impl Into<String>, passed: bool, value: f64, detail: String) -> Self {
        Self {
            name: name.into(),
            passed,
            value,
            detail,
        }
    }
}

pub fn all_passed(checks: &[CheckOutcome]) -> bool {
    checks.iter().all(|c| c.passed)
}

/// Mean and standard error of the estimator at `theta`, both relative to the
/// exact likelihood.
pub fn relative_estimator_moments(
    model: &ToyModel,
    theta: f64,
    cfg: &EstimatorCheckConfig,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, f64)> {
    let dist = TruncationDistribution::geometric(cfg.gamma0)?;
    let exact = model.log_limit(&[theta]);
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..cfg.replicates {
        let k = dist.sample(rng)?;
        let rec = estimate(model, &[theta], k, cfg.scheme, &dist)?;
        let r = rec.value.scale_log(-exact).to_real();
        sum += r;
        sum_sq += r * r;
    }
    let n = cfg.replicates as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean) * n / (n - 1.0);
    Ok((mean, (var.max(0.0) / n).sqrt()))
}

/// Compares the average estimate with the exact likelihood at each
/// configured state.
pub fn estimator_check(cfg: &EstimatorCheckConfig, seed: u64) -> Result<Vec<CheckOutcome>> {
    let model = ToyModel::new(cfg.data.clone());
    let mut out = Vec::new();
    for (i, &theta) in cfg.thetas.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(i as u64);
        let (mean, se) = relative_estimator_moments(&model, theta, cfg, &mut rng)?;
        let z = (mean - 1.0).abs() / se;
        out.push(CheckOutcome::new(
            format!("unbiased at theta = {theta}"),
            z <= cfg.z,
            z,
            format!("mean / exact = {mean:.5}, se = {se:.5}, |z| = {z:.2} (limit {})", cfg.z),
        ));
    }
    Ok(out)
}

fn exp_growth_error(method: OdeMethod, dt: f64) -> Result<f64> {
    let sol = ode_solve(|_t, z: &[f64], dz: &mut [f64]| dz[0] = z[0], &[1.0], 0.0, &[1.0], OdeOptions::new(dt, method))?;
    Ok((sol.states[0][0] - 1f64.exp()).abs())
}

fn order_check(name: &str, ratio: f64, lo: f64, hi: f64) -> CheckOutcome {
    CheckOutcome::new(
        name,
        (lo..=hi).contains(&ratio),
        ratio,
        format!("error ratio under halving {ratio:.3}, expected within [{lo}, {hi}]"),
    )
}

/// Convergence orders of the numerical kernels and the heat solver oracle.
pub fn convergence_check(seed: u64) -> Result<Vec<CheckOutcome>> {
    let mut out = Vec::new();
    let euler = exp_growth_error(OdeMethod::Euler, 0.01)? / exp_growth_error(OdeMethod::Euler, 0.005)?;
    out.push(order_check("euler order on dz/dt = z", euler, 1.6, 2.4));
    let rk4 = exp_growth_error(OdeMethod::Rk4, 0.1)? / exp_growth_error(OdeMethod::Rk4, 0.05)?;
    out.push(order_check("rk4 order on dz/dt = z", rk4, 12.0, 20.0));

    let trap_err = |n: usize| -> Result<f64> {
        let grid = Grid1D::uniform(0.0, 1.0, n + 1)?;
        let v: Vec<f64> = grid.nodes().iter().map(|x| x * x).collect();
        Ok((trapezoid(&v, &grid)? - 1.0 / 3.0).abs())
    };
    let trap = trap_err(16)? / trap_err(32)?;
    out.push(order_check("trapezoid order on x^2", trap, 3.6, 4.4));

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DMatrix::from_fn(8, 8, |_, _| rng.random_range(-1.0..1.0));
    let a = &g * g.transpose() + DMatrix::identity(8, 8);
    let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
    let direct = cholesky(&a)?.solve(&DVector::from_column_slice(&b));
    let apply = |v: &[f64], o: &mut [f64]| o.copy_from_slice((&a * DVector::from_column_slice(v)).as_slice());
    let cg = cg_solve(apply, &b, 8, &Preconditioner::None)?;
    let rel = (DVector::from_column_slice(&cg.z) - &direct).norm() / direct.norm();
    out.push(CheckOutcome::new(
        "cg with k = n matches a direct solve",
        rel <= 1e-8,
        rel,
        format!("relative difference {rel:.2e}, limit 1e-8"),
    ));

    let field = heat_solve(0.85, 0.21, 0.05, Stencil::default())?;
    let (mut num, mut den) = (0.0, 0.0);
    for (i, u) in field.interior.iter().enumerate() {
        let e = analytic(0.85, 0.21, (i + 1) as f64 * field.dx, HORIZON);
        num += (u - e).powi(2);
        den += e * e;
    }
    let rel = (num / den).sqrt();
    out.push(CheckOutcome::new(
        "heat solver matches the separable solution",
        rel <= 1e-3,
        rel,
        format!("relative L2 error {rel:.2e} at dx = 0.05, limit 1e-3"),
    ));
    Ok(out)
}
