//! Randomized low-rank approximation with deterministic and probabilistic
//! accuracy guarantees, randomized norm estimation, and the test matrices and
//! Monte-Carlo harnesses used to check them.

pub mod adaptive;
pub mod bounds;
pub mod densela;
pub mod error;
pub mod experiments;
pub mod normest;
pub mod sketch;
pub mod testmat;
pub mod validate;

pub use densela::{GaussianStream, Matrix, RngSeed};
pub use error::{Error, Result};
