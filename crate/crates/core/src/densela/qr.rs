use serde::{Deserialize, Serialize};

use super::matrix::{dot, norm2, Matrix};
use crate::error::{Error, Result};

/// Thin QR factors: `q` is `m × ℓ` with orthonormal columns, `r` is `ℓ × ℓ`
/// upper triangular with a nonnegative diagonal.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QrFactors {
    pub q: Matrix,
    pub r: Matrix,
}

impl QrFactors {
    pub fn r_diagonal(&self) -> Vec<f64> {
        (0..self.r.rows()).map(|i| self.r[(i, i)]).collect()
    }
}

/// Householder QR of a tall (or square) matrix.
pub fn qr_factor(y: &Matrix) -> Result<QrFactors> {
    let (m, n) = y.shape();
    if m < n {
        return Err(Error::InvalidArgument(format!(
            "QR needs rows >= cols, got {m}x{n}"
        )));
    }
    let mut a = y.to_col_major();
    // Unit Householder vectors, stored over rows j..m of column j.
    let mut vs: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut diag = vec![0.0; n];

    for j in 0..n {
        let x = &a[j * m + j..(j + 1) * m];
        let alpha = norm2(x);
        if alpha == 0.0 {
            vs.push(Vec::new());
            diag[j] = 0.0;
            continue;
        }
        let beta = if x[0] >= 0.0 { -alpha } else { alpha };
        let mut v = x.to_vec();
        v[0] -= beta;
        let vn = norm2(&v);
        for e in v.iter_mut() {
            *e /= vn;
        }
        diag[j] = beta;
        // Column j becomes (beta, 0, ..., 0).
        a[j * m + j] = beta;
        for e in a[j * m + j + 1..(j + 1) * m].iter_mut() {
            *e = 0.0;
        }
        for c in j + 1..n {
            let col = &mut a[c * m + j..(c + 1) * m];
            let s = 2.0 * dot(&v, col);
            for (ci, vi) in col.iter_mut().zip(&v) {
                *ci -= s * vi;
            }
        }
        vs.push(v);
    }

    // Q = H_0 H_1 ... H_{n-1} applied to the first n columns of I.
    let mut q = vec![0.0; m * n];
    for j in 0..n {
        q[j * m + j] = 1.0;
    }
    for j in (0..n).rev() {
        let v = &vs[j];
        if v.is_empty() {
            continue;
        }
        for c in 0..n {
            let col = &mut q[c * m + j..(c + 1) * m];
            let s = 2.0 * dot(v, col);
            if s != 0.0 {
                for (ci, vi) in col.iter_mut().zip(v) {
                    *ci -= s * vi;
                }
            }
        }
    }

    let mut r = Matrix::zeros(n, n);
    for c in 0..n {
        for i in 0..=c {
            r[(i, c)] = a[c * m + i];
        }
    }
    // Sign convention: nonnegative diagonal of R.
    for (j, &d) in diag.iter().enumerate() {
        if d < 0.0 {
            for c in j..n {
                r[(j, c)] = -r[(j, c)];
            }
            for e in q[j * m..(j + 1) * m].iter_mut() {
                *e = -*e;
            }
        }
    }
    Ok(QrFactors {
        q: Matrix::from_col_major(m, n, &q),
        r,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::rng::{gaussian_matrix, RngSeed};

    #[test]
    fn identity_columns() {
        let y = Matrix::identity(4).columns(0, 2);
        let f = qr_factor(&y).unwrap();
        assert!(f.q.max_abs_diff(&y) < 1e-15);
        assert!(f.r.max_abs_diff(&Matrix::identity(2)) < 1e-15);
    }

    #[test]
    fn three_four_five() {
        let y = Matrix::from_rows(&[vec![3.0], vec![4.0]]).unwrap();
        let f = qr_factor(&y).unwrap();
        assert!((f.q[(0, 0)] - 0.6).abs() < 1e-15);
        assert!((f.q[(1, 0)] - 0.8).abs() < 1e-15);
        assert!((f.r[(0, 0)] - 5.0).abs() < 1e-14);
    }

    #[test]
    fn random_tall_reconstructs() {
        let y = gaussian_matrix(50, 10, RngSeed(7));
        let f = qr_factor(&y).unwrap();
        assert!(f.q.orthonormality_defect() <= 1e-13);
        let recon = f.q.matmul(&f.r).unwrap();
        assert!(recon.sub(&y).unwrap().fro_norm() <= 1e-13 * (1.0 + y.fro_norm()));
        for i in 0..10 {
            assert!(f.r[(i, i)] >= 0.0);
            for j in 0..i {
                assert_eq!(f.r[(i, j)], 0.0);
            }
        }
    }

    #[test]
    fn rank_deficient_input_still_orthonormal() {
        let a = gaussian_matrix(20, 2, RngSeed(8));
        let y = a.hstack(&a).unwrap();
        let f = qr_factor(&y).unwrap();
        assert!(f.q.orthonormality_defect() <= 1e-13);
        assert!(f.r[(3, 3)] < 1e-12);
    }

    #[test]
    fn wide_input_rejected() {
        assert!(qr_factor(&Matrix::zeros(2, 3)).is_err());
    }
}
