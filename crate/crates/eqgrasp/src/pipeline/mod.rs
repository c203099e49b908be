//! Commands: dataset generation, training, sampling, evaluation, self-checks
//! and dataset statistics.

pub mod eval;
pub mod gen;
pub mod sample;
pub mod stats;
pub mod train;
pub mod verify;
