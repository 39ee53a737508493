//! Log-Gaussian Cox process on an interval. The latent log-intensity `f`
//! lives on the event locations; fidelity `k` integrates the intensity with
//! the trapezoid rule on `2k + c` uniform nodes, whose latent values are a
//! draw from the Gaussian conditional given `f`. The standard-normal noise of
//! that draw is derived from an auxiliary seed and stays fixed until the
//! chain refreshes it.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::estimator::{FreshCursor, TargetSequence};
use crate::numerics::gaussian::conditional_operators;
use crate::numerics::{cholesky, psd_sqrt, se_cross_gram, se_gram, trapezoid, CholeskyFactor, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LgcpParams {
    pub lengthscale: f64,
    pub variance: f64,
    /// Node-count offset `c`.
    pub node_offset: usize,
}

impl Default for LgcpParams {
    fn default() -> Self {
        Self {
            lengthscale: 20.0,
            variance: 1.0,
            node_offset: 10,
        }
    }
}

/// Conditional-draw operators for one fidelity: node values are
/// `map * f + root * xi`.
#[derive(Debug)]
struct LevelOperators {
    grid: Grid1D,
    map: DMatrix<f64>,
    root: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct LgcpModel {
    domain: (f64, f64),
    events: Vec<f64>,
    params: LgcpParams,
    prior: Arc<CholeskyFactor>,
    operators: Arc<Mutex<HashMap<usize, Arc<LevelOperators>>>>,
    aux_seed: u64,
}

impl LgcpModel {
    pub fn new(domain: (f64, f64), mut events: Vec<f64>, params: LgcpParams) -> Result<Self> {
        let (a, b) = domain;
        if !(b > a) || events.is_empty() {
            return Err(Error::InvalidArgument("LGCP needs events on a nonempty interval".into()));
        }
        if events.iter().any(|x| !(a..=b).contains(x)) {
            return Err(Error::InvalidArgument(format!("events must lie within [{a}, {b}]")));
        }
        if !(params.lengthscale > 0.0 && params.variance > 0.0) {
            return Err(Error::InvalidArgument("kernel parameters must be positive".into()));
        }
        events.sort_by(f64::total_cmp);
        let prior = cholesky(&se_gram(&events, params.lengthscale, params.variance))?;
        Ok(Self {
            domain,
            events,
            params,
            prior: Arc::new(prior),
            operators: Arc::default(),
            aux_seed: 0,
        })
    }

    pub fn events(&self) -> &[f64] {
        &self.events
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Prior covariance factor of the latent values at the events.
    pub fn prior(&self) -> Arc<CholeskyFactor> {
        Arc::clone(&self.prior)
    }

    pub fn node_count(&self, k: usize) -> usize {
        2 * k + self.params.node_offset
    }

    fn operators(&self, k: usize) -> Result<Arc<LevelOperators>> {
        if let Some(ops) = self.operators.lock().expect("operator cache poisoned").get(&k) {
            return Ok(Arc::clone(ops));
        }
        let (a, b) = self.domain;
        let grid = Grid1D::uniform(a, b, self.node_count(k))?;
        let LgcpParams {
            lengthscale: l,
            variance: v,
            ..
        } = self.params;
        let s_oo = se_gram(&self.events, l, v);
        let s_no = se_cross_gram(grid.nodes(), &self.events, l, v);
        let s_nn = se_gram(grid.nodes(), l, v);
        let (map, cov) = conditional_operators(&s_oo, &s_no, &s_nn)?;
        let ops = Arc::new(LevelOperators {
            grid,
            map,
            root: psd_sqrt(&cov),
        });
        self.operators
            .lock()
            .expect("operator cache poisoned")
            .insert(k, Arc::clone(&ops));
        Ok(ops)
    }

    /// Standard-normal noise for the nodes of fidelity `k`.
    fn noise(&self, k: usize) -> DVector<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.aux_seed);
        rng.set_stream(k as u64);
        DVector::from_fn(self.node_count(k), |_, _| StandardNormal.sample(&mut rng))
    }

    /// Latent values on the quadrature nodes of fidelity `k`.
    pub fn node_values(&self, f: &[f64], k: usize) -> Result<(Grid1D, Vec<f64>)> {
        if f.len() != self.events.len() {
            return Err(Error::DimensionMismatch {
                expected: self.events.len(),
                got: f.len(),
            });
        }
        let ops = self.operators(k)?;
        let g = &ops.map * DVector::from_column_slice(f) + &ops.root * self.noise(k);
        Ok((ops.grid.clone(), g.as_slice().to_vec()))
    }

    /// `int (1 - exp g) + sum f` with the integral on the given nodes.
    pub fn log_lik_on(&self, f: &[f64], grid: &Grid1D, g: &[f64]) -> Result<f64> {
        let integrand: Vec<f64> = g.iter().map(|x| 1.0 - x.exp()).collect();
        Ok(trapezoid(&integrand, grid)? + f.iter().sum::<f64>())
    }

    /// `f -> E[exp f(t) | f at the events]`.
    pub fn intensity_functional(&self, t: f64) -> impl Fn(&[f64]) -> f64 + Send + Sync + 'static {
        let LgcpParams {
            lengthscale: l,
            variance: v,
            ..
        } = self.params;
        let k_t = DVector::from_column_slice(se_cross_gram(&self.events, &[t], l, v).as_slice());
        let w = self.prior.solve(&k_t);
        let half_var = 0.5 * (v - w.dot(&k_t)).max(0.0);
        move |f: &[f64]| (w.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() + half_var).exp()
    }

    pub fn intensity_at(&self, t: f64, f: &[f64]) -> f64 {
        self.intensity_functional(t)(f)
    }
}

impl TargetSequence for LgcpModel {
    type Cursor = FreshCursor;

    fn dim(&self) -> usize {
        self.events.len()
    }

    fn log_prior(&self, theta: &[f64]) -> f64 {
        let x = DVector::from_column_slice(theta);
        let n = theta.len() as f64;
        -0.5 * (n * (2.0 * std::f64::consts::PI).ln() + self.prior.log_det())
            - 0.5 * x.dot(&self.prior.solve(&x))
    }

    fn start(&self, theta: &[f64], k: usize) -> Result<(FreshCursor, f64)> {
        let (grid, g) = self.node_values(theta, k)?;
        Ok((FreshCursor::new(theta, k), self.log_lik_on(theta, &grid, &g)?))
    }

    fn advance(&self, cursor: &mut FreshCursor) -> Result<f64> {
        cursor.level += 1;
        let (grid, g) = self.node_values(&cursor.theta, cursor.level)?;
        self.log_lik_on(&cursor.theta, &grid, &g)
    }

    /// One unit per quadrature node; levels are independent evaluations.
    fn level_cost(&self, k: usize) -> f64 {
        self.node_count(k) as f64
    }

    fn fresh_cost(&self, k: usize) -> f64 {
        self.node_count(k) as f64
    }

    fn has_auxiliaries(&self) -> bool {
        true
    }

    fn auxiliary_seed(&self) -> u64 {
        self.aux_seed
    }

    fn set_auxiliary_seed(&mut self, seed: u64) {
        self.aux_seed = seed;
    }
}
