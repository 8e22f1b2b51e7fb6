use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::svd::two_norm;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatrixNorms {
    /// Maximum absolute column sum.
    pub one: f64,
    /// `σ₁` from the exact SVD.
    pub two: f64,
    pub fro: f64,
    /// Largest absolute entry.
    pub max: f64,
}

pub fn norms(a: &Matrix) -> Result<MatrixNorms> {
    Ok(MatrixNorms {
        one: a.one_norm(),
        two: two_norm(a)?,
        fro: a.fro_norm(),
        max: a.max_abs(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::matrix::norm2;
    use crate::densela::rng::{gaussian_matrix, RngSeed};

    #[test]
    fn hand_example() {
        let a = Matrix::from_rows(&[vec![1.0, -2.0], vec![3.0, 4.0]]).unwrap();
        let n = norms(&a).unwrap();
        assert_eq!(n.one, 6.0);
        assert_eq!(n.max, 4.0);
        assert!((n.fro - 30f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn identity_norms() {
        let n = norms(&Matrix::identity(6)).unwrap();
        assert_eq!(n.one, 1.0);
        assert!((n.two - 1.0).abs() < 1e-15);
    }

    #[test]
    fn two_norm_matches_power_iteration() {
        let a = gaussian_matrix(9, 9, RngSeed(21));
        let ata = a.t_matmul(&a).unwrap();
        let mut x = vec![1.0; 9];
        let mut lambda = 0.0;
        for _ in 0..10_000 {
            let y = ata.matvec(&x).unwrap();
            lambda = norm2(&y);
            x = y.into_iter().map(|v| v / lambda).collect();
        }
        let n = norms(&a).unwrap();
        assert!((n.two - lambda.sqrt()).abs() <= 1e-8 * n.two);
    }
}
