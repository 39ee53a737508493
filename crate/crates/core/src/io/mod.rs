//! Configuration, datasets and result files.

pub mod config;
pub mod data;
pub mod output;

pub use config::{Experiment, ExperimentConfig, ModeConfig, SamplerConfig};
pub use data::{load_coal, load_lynx_hare, LynxHare};
pub use output::{read_samples, write_atomic, write_json, write_samples};
