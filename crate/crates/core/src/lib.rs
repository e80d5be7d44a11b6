//! Sampling and iterative reconstruction in reproducing kernel subspaces of `L^p`.

pub mod cli;
pub mod error;
pub mod kernel;
pub mod linalg;
pub mod noise;
pub mod operator;
pub mod poly;
pub mod quadrature;
pub mod reconstruct;
pub mod sampling;

pub use error::{Error, Result};
