//! Deterministic numeric kernels shared by every training stage.

mod adam;
mod dropout;
mod lr;
mod matrix;
mod rng;

pub use adam::{AdamConfig, AdamState};
pub use dropout::dropout_mask;
pub use lr::LrSchedule;
pub use matrix::{dot, DenseMatrix, Real};
pub use rng::{rng_for, Stream};
