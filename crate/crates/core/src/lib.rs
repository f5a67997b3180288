//! Selection-adjusted inference after the lasso.

pub mod cli;
pub mod cv;
pub mod error;
pub mod geometry;
pub mod inference;
pub mod lasso;
pub mod linalg;
pub mod normal;
pub mod simulation;
pub mod tgauss;

pub use error::{Error, Result};
