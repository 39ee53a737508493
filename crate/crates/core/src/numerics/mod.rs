//! Numerical kernels shared by the models.

pub mod cg;
pub mod gaussian;
pub mod kernel;
pub mod ode;
pub mod quadrature;

pub use cg::{cg_advance, cg_solve, CgState, Preconditioner};
pub use gaussian::{cholesky, gaussian_conditional, mvn_sample, psd_sqrt, CholeskyFactor};
pub use kernel::{se_cross_gram, se_gram, se_kernel};
pub use ode::{ode_solve, OdeMethod, OdeOptions};
pub use quadrature::{trapezoid, Grid1D};
