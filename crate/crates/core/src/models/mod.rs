pub mod gp;
pub mod heat;
pub mod lgcp;
pub mod lotka_volterra;
pub mod toy;
