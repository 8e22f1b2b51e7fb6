//! Dense real linear algebra: the matrix type, Householder QR, the Jacobi
//! SVD oracle, seeded Gaussian draws and matrix file formats.

mod bidiag;
pub mod io;
pub mod matrix;
pub mod norms;
pub mod qr;
pub mod rng;
pub mod svd;

pub use matrix::{dot, norm1, norm2, norm_inf, Matrix};
pub use norms::{norms, MatrixNorms};
pub use qr::{qr_factor, QrFactors};
pub use rng::{gaussian_matrix, GaussianStream, RngSeed};
pub use svd::{exact_svd, singular_values, truncated_svd, two_norm, SvdFactors};
