//! Conjugate gradients with a fixed iteration budget.
//!
//! There is no tolerance-based stopping: the iterate after exactly `k` steps
//! defines fidelity `k`, and a state can be advanced later to reach `k + m`
//! with the same arithmetic as a single `k + m` run.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Preconditioner {
    None,
    /// Inverse diagonal of the operator.
    Jacobi(Vec<f64>),
}

impl Preconditioner {
    pub fn jacobi_from_diagonal(diag: &[f64]) -> Result<Self> {
        if diag.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::InvalidArgument(
                "Jacobi preconditioner needs a positive diagonal".into(),
            ));
        }
        Ok(Preconditioner::Jacobi(diag.iter().map(|d| 1.0 / d).collect()))
    }

    fn apply(&self, r: &[f64], out: &mut [f64]) {
        match self {
            Preconditioner::None => out.copy_from_slice(r),
            Preconditioner::Jacobi(inv) => {
                for ((o, ri), w) in out.iter_mut().zip(r).zip(inv) {
                    *o = ri * w;
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CgState {
    pub z: Vec<f64>,
    pub residual: Vec<f64>,
    pub direction: Vec<f64>,
    /// Preconditioned residual `M^{-1} r`.
    precond_residual: Vec<f64>,
    /// `r^T M^{-1} r`.
    rho: f64,
    pub iterations: usize,
}

impl CgState {
    /// Zero initial iterate for right-hand side `b`.
    pub fn new(b: &[f64], preconditioner: &Preconditioner) -> Self {
        let mut pr = vec![0.0; b.len()];
        preconditioner.apply(b, &mut pr);
        let rho = dot(b, &pr);
        Self {
            z: vec![0.0; b.len()],
            residual: b.to_vec(),
            direction: pr.clone(),
            precond_residual: pr,
            rho,
            iterations: 0,
        }
    }

    pub fn converged_exactly(&self) -> bool {
        self.rho == 0.0
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Runs `m` more iterations on `state`.
pub fn cg_advance<A>(
    state: &mut CgState,
    apply_a: &mut A,
    preconditioner: &Preconditioner,
    m: usize,
) -> Result<()>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let n = state.z.len();
    let mut ap = vec![0.0; n];
    for _ in 0..m {
        if state.converged_exactly() {
            state.iterations += 1;
            continue;
        }
        apply_a(&state.direction, &mut ap);
        let curvature = dot(&state.direction, &ap);
        if !(curvature > 0.0) || !curvature.is_finite() {
            return Err(Error::CgBreakdown {
                iteration: state.iterations + 1,
                curvature,
            });
        }
        let alpha = state.rho / curvature;
        for i in 0..n {
            state.z[i] += alpha * state.direction[i];
            state.residual[i] -= alpha * ap[i];
        }
        preconditioner.apply(&state.residual, &mut state.precond_residual);
        let rho_next = dot(&state.residual, &state.precond_residual);
        let beta = rho_next / state.rho;
        for i in 0..n {
            state.direction[i] = state.precond_residual[i] + beta * state.direction[i];
        }
        state.rho = rho_next;
        state.iterations += 1;
    }
    Ok(())
}

/// `k` iterations of (preconditioned) CG on `A z = b` from `z = 0`.
pub fn cg_solve<A>(
    mut apply_a: A,
    b: &[f64],
    k: usize,
    preconditioner: &Preconditioner,
) -> Result<CgState>
where
    A: FnMut(&[f64], &mut [f64]),
{
    let mut state = CgState::new(b, preconditioner);
    cg_advance(&mut state, &mut apply_a, preconditioner, k)?;
    Ok(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, DVector};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn matvec(a: &DMatrix<f64>) -> impl FnMut(&[f64], &mut [f64]) + '_ {
        move |x, out| {
            let y = a * DVector::from_column_slice(x);
            out.copy_from_slice(y.as_slice());
        }
    }

    fn random_spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        &g * g.transpose() + DMatrix::identity(n, n) * 0.5
    }

    #[test]
    fn identity_converges_in_one_step() {
        let a = DMatrix::<f64>::identity(4, 4);
        let b = [1.0, -2.0, 0.5, 3.0];
        let s = cg_solve(matvec(&a), &b, 1, &Preconditioner::None).unwrap();
        assert_eq!(s.z, b.to_vec());
        let s = cg_solve(matvec(&a), &b, 5, &Preconditioner::None).unwrap();
        assert_eq!(s.z, b.to_vec());
        assert_eq!(s.iterations, 5);
    }

    #[test]
    fn zero_iterations_is_zero() {
        let a = random_spd(5, 1);
        let s = cg_solve(matvec(&a), &[1.0; 5], 0, &Preconditioner::None).unwrap();
        assert_eq!(s.z, vec![0.0; 5]);
    }

    #[test]
    fn full_krylov_space_matches_direct_solve() {
        for seed in 0..5 {
            let a = random_spd(8, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
            let b: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let direct = a.clone().cholesky().unwrap().solve(&DVector::from_vec(b.clone()));
            for pre in [
                Preconditioner::None,
                Preconditioner::jacobi_from_diagonal(a.diagonal().as_slice()).unwrap(),
            ] {
                let s = cg_solve(matvec(&a), &b, 8, &pre).unwrap();
                let rel = (DVector::from_vec(s.z.clone()) - &direct).norm() / direct.norm();
                assert!(rel < 1e-8, "seed {seed}: rel {rel}");
            }
        }
    }

    #[test]
    fn resumable_bit_identical() {
        let a = random_spd(12, 9);
        let b: Vec<f64> = (0..12).map(|i| (i as f64).sin()).collect();
        let pre = Preconditioner::None;
        let once = cg_solve(matvec(&a), &b, 7, &pre).unwrap();
        let mut staged = cg_solve(matvec(&a), &b, 3, &pre).unwrap();
        cg_advance(&mut staged, &mut matvec(&a), &pre, 4).unwrap();
        assert_eq!(once, staged);
        let mut single = cg_solve(matvec(&a), &b, 0, &pre).unwrap();
        for _ in 0..7 {
            cg_advance(&mut single, &mut matvec(&a), &pre, 1).unwrap();
        }
        assert_eq!(once, single);
    }

    #[test]
    fn breakdown_on_indefinite_operator() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let err = cg_solve(matvec(&a), &[0.0, 1.0], 1, &Preconditioner::None).unwrap_err();
        assert!(matches!(err, Error::CgBreakdown { iteration: 1, .. }));
    }

    #[test]
    fn residual_tracks_b_minus_az() {
        let a = random_spd(10, 3);
        let b: Vec<f64> = (0..10).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let s = cg_solve(matvec(&a), &b, 6, &Preconditioner::None).unwrap();
        let r = DVector::from_vec(b) - &a * DVector::from_vec(s.z.clone());
        let diff = (r - DVector::from_vec(s.residual.clone())).amax();
        assert!(diff < 1e-10);
    }
}
