//! Fixed-step explicit Runge-Kutta integrators.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OdeMethod {
    Euler,
    Rk4,
    /// Tsitouras 5(4), used here without step-size control.
    Tsit5,
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub dt: f64,
    pub method: OdeMethod,
    pub max_steps: u64,
}

impl OdeOptions {
    pub const DEFAULT_MAX_STEPS: u64 = 100_000_000;

    pub fn new(dt: f64, method: OdeMethod) -> Self {
        Self {
            dt,
            method,
            max_steps: Self::DEFAULT_MAX_STEPS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct OdeSolution {
    /// One state per requested output time.
    pub states: Vec<Vec<f64>>,
    pub steps: u64,
}

// Tsit5 tableau (Tsitouras 2011).
const T5_C: [f64; 6] = [0.161, 0.327, 0.9, 0.980_025_540_904_509_7, 1.0, 1.0];
const T5_A2: [f64; 1] = [0.161];
const T5_A3: [f64; 2] = [-0.008_480_655_492_356_989, 0.335_480_655_492_357];
const T5_A4: [f64; 3] = [2.897_153_057_105_493, -6.359_448_489_975_075, 4.362_295_432_869_581_5];
const T5_A5: [f64; 4] = [
    5.325_864_828_439_257,
    -11.748_883_564_062_828,
    7.495_539_342_889_836_5,
    -0.092_495_066_361_755_25,
];
const T5_A6: [f64; 5] = [
    5.861_455_442_946_42,
    -12.920_969_317_847_11,
    8.159_367_898_576_159,
    -0.071_584_973_281_401,
    -0.028_269_050_394_068_383,
];
const T5_B: [f64; 6] = [
    0.096_460_766_818_065_23,
    0.01,
    0.479_889_650_414_499_6,
    1.379_008_574_103_742,
    -3.290_069_515_436_081,
    2.324_710_524_099_774,
];

/// Reusable stage storage for one system size.
pub struct Stepper {
    method: OdeMethod,
    stages: Vec<Vec<f64>>,
    scratch: Vec<f64>,
    /// `f(t, z)` at the current point, valid when `fsal` is set.
    fsal: bool,
}

impl Stepper {
    pub fn new(method: OdeMethod, dim: usize) -> Self {
        let n = match method {
            OdeMethod::Euler => 1,
            OdeMethod::Rk4 => 4,
            OdeMethod::Tsit5 => 7,
        };
        Self {
            method,
            stages: vec![vec![0.0; dim]; n],
            scratch: vec![0.0; dim],
            fsal: false,
        }
    }

    fn combine(scratch: &mut [f64], z: &[f64], h: f64, coeffs: &[f64], stages: &[Vec<f64>]) {
        scratch.copy_from_slice(z);
        for (a, k) in coeffs.iter().zip(stages) {
            let ha = h * a;
            for (s, kv) in scratch.iter_mut().zip(k) {
                *s += ha * kv;
            }
        }
    }

    /// Advances `z` from `t` to `t + h` in place.
    pub fn step<F>(&mut self, rhs: &mut F, t: f64, z: &mut [f64], h: f64)
    where
        F: FnMut(f64, &[f64], &mut [f64]),
    {
        match self.method {
            OdeMethod::Euler => {
                rhs(t, z, &mut self.stages[0]);
                for (zi, k) in z.iter_mut().zip(&self.stages[0]) {
                    *zi += h * k;
                }
            }
            OdeMethod::Rk4 => {
                let (k1, rest) = self.stages.split_at_mut(1);
                let (k2, rest) = rest.split_at_mut(1);
                let (k3, k4) = rest.split_at_mut(1);
                let (k1, k2, k3, k4) = (&mut k1[0], &mut k2[0], &mut k3[0], &mut k4[0]);
                rhs(t, z, k1);
                for i in 0..z.len() {
                    self.scratch[i] = z[i] + 0.5 * h * k1[i];
                }
                rhs(t + 0.5 * h, &self.scratch, k2);
                for i in 0..z.len() {
                    self.scratch[i] = z[i] + 0.5 * h * k2[i];
                }
                rhs(t + 0.5 * h, &self.scratch, k3);
                for i in 0..z.len() {
                    self.scratch[i] = z[i] + h * k3[i];
                }
                rhs(t + h, &self.scratch, k4);
                for i in 0..z.len() {
                    z[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
                }
            }
            OdeMethod::Tsit5 => {
                if !self.fsal {
                    rhs(t, z, &mut self.stages[0]);
                }
                let rows: [&[f64]; 5] = [&T5_A2, &T5_A3, &T5_A4, &T5_A5, &T5_A6];
                for (s, row) in rows.iter().enumerate() {
                    Self::combine(&mut self.scratch, z, h, row, &self.stages[..=s]);
                    rhs(t + T5_C[s] * h, &self.scratch, &mut self.stages[s + 1]);
                }
                Self::combine(&mut self.scratch, z, h, &T5_B, &self.stages[..6]);
                z.copy_from_slice(&self.scratch);
                // stage 7 is f(t + h, z_new); it seeds the next step
                let (first, rest) = self.stages.split_at_mut(1);
                rhs(t + h, z, &mut rest[5]);
                first[0].copy_from_slice(&rest[5]);
                self.fsal = true;
            }
        }
    }

    pub fn reset(&mut self) {
        self.fsal = false;
    }
}

/// Integrates `dz/dt = rhs(t, z)` from `t0` and records the state at each of
/// `t_out` (nondecreasing, `>= t0`). Steps have size `dt` except the last one
/// before each output time, which is shortened to land on it exactly.
pub fn ode_solve<F>(
    mut rhs: F,
    z0: &[f64],
    t0: f64,
    t_out: &[f64],
    opts: OdeOptions,
) -> Result<OdeSolution>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    if !(opts.dt > 0.0) || !opts.dt.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "step size must be positive, got {}",
            opts.dt
        )));
    }
    if t_out.first().is_some_and(|&t| t < t0) || t_out.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidArgument(
            "output times must be nondecreasing and not before t0".into(),
        ));
    }
    let mut stepper = Stepper::new(opts.method, z0.len());
    let mut z = z0.to_vec();
    let mut t = t0;
    let mut steps: u64 = 0;
    let mut states = Vec::with_capacity(t_out.len());
    for &target in t_out {
        let span = target - t;
        if span > 0.0 {
            let n = ((span / opts.dt) * (1.0 - 1e-12)).ceil().max(1.0) as u64;
            if steps + n > opts.max_steps {
                return Err(Error::OdeStepLimit {
                    max_steps: opts.max_steps,
                });
            }
            let start = t;
            for i in 0..n {
                let t_i = start + i as f64 * opts.dt;
                let h = if i + 1 == n { target - t_i } else { opts.dt };
                stepper.step(&mut rhs, t_i, &mut z, h);
                if z.iter().any(|v| !v.is_finite()) {
                    return Err(Error::OdeBlowUp { time: t_i + h });
                }
            }
            steps += n;
            t = target;
        }
        states.push(z.clone());
    }
    Ok(OdeSolution { states, steps })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn exp_growth(method: OdeMethod, dt: f64) -> f64 {
        let sol = ode_solve(
            |_, z: &[f64], dz: &mut [f64]| dz[0] = z[0],
            &[1.0],
            0.0,
            &[1.0],
            OdeOptions::new(dt, method),
        )
        .unwrap();
        sol.states[0][0]
    }

    #[test]
    fn tableau_rows_are_consistent() {
        let rows: [&[f64]; 5] = [&T5_A2, &T5_A3, &T5_A4, &T5_A5, &T5_A6];
        for (row, c) in rows.iter().zip(T5_C) {
            let s: f64 = row.iter().sum();
            assert!((s - c).abs() < 1e-12, "{s} vs {c}");
        }
        assert!((T5_B.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_rhs_is_constant() {
        for m in [OdeMethod::Euler, OdeMethod::Rk4, OdeMethod::Tsit5] {
            let sol = ode_solve(
                |_, _: &[f64], dz: &mut [f64]| dz.fill(0.0),
                &[2.5, -1.0],
                0.0,
                &[0.3, 1.0, 7.0],
                OdeOptions::new(0.07, m),
            )
            .unwrap();
            for s in &sol.states {
                assert_eq!(s, &vec![2.5, -1.0]);
            }
        }
    }

    #[test]
    fn euler_matches_product() {
        let got = exp_growth(OdeMethod::Euler, 0.1);
        assert!((got - 1.1f64.powi(10)).abs() < 1e-12, "{got}");
        assert!((got - 2.59374).abs() < 1e-5);
    }

    #[test]
    fn convergence_orders() {
        let e = std::f64::consts::E;
        let err = |m, dt| (exp_growth(m, dt) - e).abs();
        let euler = err(OdeMethod::Euler, 0.01) / err(OdeMethod::Euler, 0.005);
        assert!((1.6..=2.4).contains(&euler), "euler ratio {euler}");
        let rk4 = err(OdeMethod::Rk4, 0.1) / err(OdeMethod::Rk4, 0.05);
        assert!((12.0..=20.0).contains(&rk4), "rk4 ratio {rk4}");
        // the step-6 error constant is small, so the asymptotic regime starts late
        let t5 = err(OdeMethod::Tsit5, 0.05) / err(OdeMethod::Tsit5, 0.025);
        assert!(t5 > 20.0, "tsit5 ratio {t5}");
        assert!(err(OdeMethod::Tsit5, 0.1) < err(OdeMethod::Rk4, 0.1));
    }

    #[test]
    fn decoupled_lotka_volterra() {
        let (alpha, gamma) = (0.8, 1.3);
        let times = [0.5, 1.0, 2.0, 3.0];
        let sol = ode_solve(
            |_, z: &[f64], dz: &mut [f64]| {
                dz[0] = alpha * z[0];
                dz[1] = -gamma * z[1];
            },
            &[1.5, 2.0],
            0.0,
            &times,
            OdeOptions::new(0.01, OdeMethod::Rk4),
        )
        .unwrap();
        for (s, t) in sol.states.iter().zip(times) {
            let u = 1.5 * (alpha * t).exp();
            let v = 2.0 * (-gamma * t).exp();
            assert!(((s[0] - u) / u).abs() < 1e-6);
            assert!(((s[1] - v) / v).abs() < 1e-6);
        }
    }

    #[test]
    fn blow_up_and_step_limit() {
        let err = ode_solve(
            |_, z: &[f64], dz: &mut [f64]| dz[0] = z[0] * z[0],
            &[1.0],
            0.0,
            &[2.0],
            OdeOptions::new(0.01, OdeMethod::Euler),
        )
        .unwrap_err();
        assert!(matches!(err, Error::OdeBlowUp { .. }));
        let mut opts = OdeOptions::new(0.001, OdeMethod::Rk4);
        opts.max_steps = 10;
        let err = ode_solve(|_, _: &[f64], dz: &mut [f64]| dz[0] = 1.0, &[0.0], 0.0, &[1.0], opts)
            .unwrap_err();
        assert!(matches!(err, Error::OdeStepLimit { max_steps: 10 }));
    }

    #[test]
    fn counts_steps() {
        let sol = ode_solve(
            |_, _: &[f64], dz: &mut [f64]| dz[0] = 1.0,
            &[0.0],
            0.0,
            &[0.25, 1.0],
            OdeOptions::new(0.1, OdeMethod::Tsit5),
        )
        .unwrap();
        assert_eq!(sol.steps, 3 + 8);
        assert!((sol.states[1][0] - 1.0).abs() < 1e-14);
    }
}
