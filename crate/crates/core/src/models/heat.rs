//! Parameter recovery for `u_t = alpha u_xx + 2 beta u` on `[0, L]` with
//! zero boundary values and `u(x, 0) = sin(pi x / 2)`. The method of lines
//! turns the PDE into an ODE system that is integrated with Tsit5 at
//! `dt = 0.4 dx^2`; fidelity `k` uses `dx = 1 / (k + 8)`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::chain::EnergySequence;
use crate::error::{Error, Result};
use crate::numerics::{ode_solve, OdeMethod, OdeOptions};

pub const LENGTH: f64 = 10.0;
pub const HORIZON: f64 = 1.0;
pub const SPACING_OFFSET: usize = 8;
pub const CFL: f64 = 0.4;

/// Finite-difference approximation of `u_xx`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stencil {
    /// Three-point central difference.
    SecondOrder,
    /// Five-point central difference; values beyond the boundary are taken
    /// from the odd reflection, which the zero boundary condition implies.
    #[default]
    FourthOrder,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeatField {
    /// Interior node values at the final time; node `i` sits at `(i + 1) dx`.
    pub interior: Vec<f64>,
    pub dx: f64,
    pub steps: u64,
}

impl HeatField {
    /// Values at all nodes including the two boundaries.
    pub fn with_boundary(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.interior.len() + 2);
        v.push(0.0);
        v.extend_from_slice(&self.interior);
        v.push(0.0);
        v
    }

    /// Piecewise-linear interpolant at `x` in `[0, L]`.
    pub fn interpolate(&self, x: f64) -> f64 {
        let n = self.interior.len() + 1;
        let mut s = (x / self.dx).clamp(0.0, n as f64);
        // land exactly on nodes that coincide up to rounding
        if (s - s.round()).abs() < 1e-9 {
            s = s.round();
        }
        let i = (s.floor() as usize).min(n - 1);
        let w = s - i as f64;
        let at = |j: usize| if j == 0 || j == n { 0.0 } else { self.interior[j - 1] };
        (1.0 - w) * at(i) + w * at(i + 1)
    }
}

pub fn spacing(k: usize) -> f64 {
    1.0 / (k + SPACING_OFFSET) as f64
}

/// Number of interior nodes for spacing `dx`.
pub fn interior_nodes(dx: f64) -> usize {
    ((LENGTH / dx).round() as usize).saturating_sub(1)
}

/// `exp((2 beta - alpha pi^2 / 4) t) sin(pi x / 2)`.
pub fn analytic(alpha: f64, beta: f64, x: f64, t: f64) -> f64 {
    ((2.0 * beta - alpha * PI * PI / 4.0) * t).exp() * (PI * x / 2.0).sin()
}

pub fn heat_solve(alpha: f64, beta: f64, dx: f64, stencil: Stencil) -> Result<HeatField> {
    let n = interior_nodes(dx);
    if n < 2 {
        return Err(Error::InvalidArgument(format!("spacing {dx} leaves too few nodes")));
    }
    let dx = LENGTH / (n + 1) as f64;
    let u0: Vec<f64> = (1..=n).map(|i| (PI * i as f64 * dx / 2.0).sin()).collect();
    let a = alpha / (dx * dx);
    let g = 2.0 * beta;
    let rhs = |_t: f64, u: &[f64], du: &mut [f64]| {
        // out-of-range indices read the boundary (0) or its odd reflection
        let at = |j: isize| -> f64 {
            if j == -1 {
                0.0
            } else if j < -1 {
                -u[(-j - 2) as usize]
            } else if j as usize >= n {
                let r = 2 * n as isize - j;
                if r >= n as isize { 0.0 } else { -u[r as usize] }
            } else {
                u[j as usize]
            }
        };
        for i in 0..n {
            let j = i as isize;
            let lap = match stencil {
                Stencil::SecondOrder => {
                    let left = if i == 0 { 0.0 } else { u[i - 1] };
                    let right = if i + 1 == n { 0.0 } else { u[i + 1] };
                    left - 2.0 * u[i] + right
                }
                Stencil::FourthOrder => {
                    (-at(j - 2) + 16.0 * at(j - 1) - 30.0 * u[i] + 16.0 * at(j + 1) - at(j + 2)) / 12.0
                }
            };
            du[i] = a * lap + g * u[i];
        }
    };
    let opts = OdeOptions::new(CFL * dx * dx, OdeMethod::Tsit5);
    let sol = ode_solve(rhs, &u0, 0.0, &[HORIZON], opts)?;
    let interior = sol.states.into_iter().next().expect("one output time");
    Ok(HeatField {
        interior,
        dx,
        steps: sol.steps,
    })
}

/// Energy `sum (u - target)^2 dx` over the interior nodes of fidelity `k`,
/// with the target field interpolated onto that grid.
#[derive(Debug, Clone)]
pub struct HeatProblem {
    target: HeatField,
    stencil: Stencil,
}

impl HeatProblem {
    pub const TRUE_ALPHA: f64 = 0.85;
    pub const TRUE_BETA: f64 = 0.21;
    pub const REFERENCE_DX: f64 = 5e-3;

    pub fn new(alpha0: f64, beta0: f64, reference_dx: f64, stencil: Stencil) -> Result<Self> {
        Ok(Self {
            target: heat_solve(alpha0, beta0, reference_dx, stencil)?,
            stencil,
        })
    }

    pub fn from_target(target: HeatField, stencil: Stencil) -> Self {
        Self { target, stencil }
    }

    pub fn target(&self) -> &HeatField {
        &self.target
    }

    pub fn energy_of(&self, field: &HeatField) -> f64 {
        field
            .interior
            .iter()
            .enumerate()
            .map(|(i, u)| {
                let d = u - self.target.interpolate((i + 1) as f64 * field.dx);
                d * d
            })
            .sum::<f64>()
            * field.dx
    }
}

impl EnergySequence for HeatProblem {
    fn dim(&self) -> usize {
        2
    }

    /// Negative parameters and unstable solves give infinite energy.
    fn energy(&self, theta: &[f64], k: usize) -> Result<f64> {
        if theta.iter().any(|p| !(*p >= 0.0)) {
            return Ok(f64::INFINITY);
        }
        match heat_solve(theta[0], theta[1], spacing(k), self.stencil) {
            Ok(field) => {
                let e = self.energy_of(&field);
                Ok(if e.is_finite() { e } else { f64::INFINITY })
            }
            Err(Error::OdeBlowUp { .. }) => Ok(f64::INFINITY),
            Err(e) => Err(e),
        }
    }

    /// Interior nodes times time steps.
    fn cost(&self, k: usize) -> f64 {
        let dx = spacing(k);
        let n = interior_nodes(dx);
        let steps = (HORIZON / (CFL * dx * dx) * (1.0 - 1e-12)).ceil();
        n as f64 * steps
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn relative_error(field: &HeatField, alpha: f64, beta: f64) -> f64 {
        let (mut num, mut den) = (0.0, 0.0);
        for (i, u) in field.interior.iter().enumerate() {
            let e = analytic(alpha, beta, (i + 1) as f64 * field.dx, HORIZON);
            num += (u - e).powi(2);
            den += e * e;
        }
        (num / den).sqrt()
    }

    #[test]
    fn matches_separable_solution() {
        let f = heat_solve(0.85, 0.21, 0.05, Stencil::FourthOrder).unwrap();
        assert_eq!(f.interior.len(), 199);
        let err = relative_error(&f, 0.85, 0.21);
        assert!(err <= 1e-3, "{err}");
        // the three-point stencil carries an O(dx^2) eigenvalue error
        let f2 = heat_solve(0.85, 0.21, 0.05, Stencil::SecondOrder).unwrap();
        let err2 = relative_error(&f2, 0.85, 0.21);
        assert!(err2 > err && err2 < 2e-3, "{err2}");
        let f3 = heat_solve(0.85, 0.21, 0.025, Stencil::SecondOrder).unwrap();
        let ratio = err2 / relative_error(&f3, 0.85, 0.21);
        assert!((3.5..4.5).contains(&ratio), "{ratio}");
    }

    #[test]
    fn boundaries_are_zero() {
        let f = heat_solve(0.5, 0.1, spacing(1), Stencil::FourthOrder).unwrap();
        let all = f.with_boundary();
        assert_eq!(all[0], 0.0);
        assert_eq!(*all.last().unwrap(), 0.0);
        assert_eq!(all.len(), 91);
        assert_eq!(f.interpolate(0.0), 0.0);
        assert_eq!(f.interpolate(LENGTH), 0.0);
    }

    #[test]
    fn spacing_and_cost() {
        assert_eq!(spacing(1), 1.0 / 9.0);
        assert_eq!(interior_nodes(spacing(1)), 89);
        let p = HeatProblem::from_target(
            heat_solve(0.85, 0.21, spacing(1), Stencil::FourthOrder).unwrap(),
            Stencil::FourthOrder,
        );
        let field = heat_solve(0.3, 0.3, spacing(1), Stencil::FourthOrder).unwrap();
        assert_eq!(p.cost(1), 89.0 * field.steps as f64);
    }

    #[test]
    fn self_comparison_has_zero_energy() {
        let k = 2;
        let target = heat_solve(0.85, 0.21, spacing(k), Stencil::FourthOrder).unwrap();
        let p = HeatProblem::from_target(target, Stencil::FourthOrder);
        assert_eq!(p.energy(&[0.85, 0.21], k).unwrap(), 0.0);
        assert_eq!(p.energy(&[-0.1, 0.21], k).unwrap(), f64::INFINITY);
    }

    #[test]
    fn grid_search_finds_truth() {
        let k = 1;
        let target = heat_solve(0.85, 0.21, spacing(k), Stencil::FourthOrder).unwrap();
        let p = HeatProblem::from_target(target, Stencil::FourthOrder);
        let h = 0.01;
        let mut best = (f64::INFINITY, 0, 0);
        for i in -10..=10 {
            for j in -10..=10 {
                let theta = [0.85 + i as f64 * h, 0.21 + j as f64 * h];
                let e = p.energy(&theta, k).unwrap();
                if e < best.0 {
                    best = (e, i, j);
                }
            }
        }
        assert_eq!((best.1, best.2), (0, 0));
    }

    #[test]
    fn interpolation_is_linear_between_nodes() {
        let f = HeatField {
            interior: vec![1.0, 3.0],
            dx: LENGTH / 3.0,
            steps: 0,
        };
        assert_eq!(f.interpolate(LENGTH / 3.0), 1.0);
        assert!((f.interpolate(LENGTH / 2.0) - 2.0).abs() < 1e-12);
        assert!((f.interpolate(LENGTH / 6.0) - 0.5).abs() < 1e-12);
    }
}
