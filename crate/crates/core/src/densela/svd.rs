use serde::{Deserialize, Serialize};

use super::bidiag::{bidiagonal_values, bidiagonalize};
use super::matrix::{dot, norm2, Matrix};
use super::qr::qr_factor;
use crate::error::{Error, Result};

pub const MAX_SWEEPS: usize = 100;

/// `A = U diag(sigma) Vᵀ` with `sigma` nonincreasing.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvdFactors {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

impl SvdFactors {
    /// Leading `k` triplets.
    pub fn truncate(&self, k: usize) -> SvdFactors {
        SvdFactors {
            u: self.u.columns(0, k),
            sigma: self.sigma[..k].to_vec(),
            v: self.v.columns(0, k),
        }
    }

    pub fn reconstruct(&self) -> Matrix {
        self.u
            .scale_columns(&self.sigma)
            .matmul(&self.v.transpose())
            .expect("factor shapes agree")
    }

    pub fn rank(&self) -> usize {
        self.sigma.len()
    }
}

/// Full SVD, `r = min(m, n)`. Wide inputs go through the transpose; tall
/// ones are reduced to their `n × n` triangular factor first and the
/// one-sided Jacobi iteration runs on that.
pub fn exact_svd(a: &Matrix) -> Result<SvdFactors> {
    let (m, n) = a.shape();
    if m < n {
        let t = exact_svd(&a.transpose())?;
        return Ok(SvdFactors {
            u: t.v,
            sigma: t.sigma,
            v: t.u,
        });
    }
    let qr = qr_factor(a)?;
    let (w, v) = jacobi(&qr.r, true)?;
    let v = v.expect("requested");
    let norms: Vec<f64> = (0..n).map(|j| norm2(&w[j * n..(j + 1) * n])).collect();
    let order = descending_order(&norms);

    let mut u_cols: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut missing = Vec::new();
    for (pos, &j) in order.iter().enumerate() {
        let s = norms[j];
        if s > 0.0 {
            u_cols.push(w[j * n..(j + 1) * n].iter().map(|x| x / s).collect());
        } else {
            u_cols.push(Vec::new());
            missing.push(pos);
        }
    }
    complete_basis(&mut u_cols, &missing, n);

    let sigma = order.iter().map(|&j| norms[j]).collect();
    let v_cols: Vec<Vec<f64>> = order
        .iter()
        .map(|&j| v[j * n..(j + 1) * n].to_vec())
        .collect();
    Ok(SvdFactors {
        u: qr.q.matmul(&Matrix::from_columns(&u_cols))?,
        sigma,
        v: Matrix::from_columns(&v_cols),
    })
}

/// Singular values only, via bidiagonalization.
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let a = if a.rows() < a.cols() {
        a.transpose()
    } else {
        a.clone()
    };
    let (d, e) = bidiagonalize(&a);
    bidiagonal_values(d, e)
}

/// Leading `k` singular triplets of `a`.
pub fn truncated_svd(a: &Matrix, k: usize) -> Result<SvdFactors> {
    let r = a.rows().min(a.cols());
    if k == 0 || k > r {
        return Err(Error::InvalidArgument(format!(
            "truncation rank {k} outside 1..={r}"
        )));
    }
    Ok(exact_svd(a)?.truncate(k))
}

/// `σ₁` of a matrix.
pub fn two_norm(a: &Matrix) -> Result<f64> {
    Ok(singular_values(a)?[0])
}

/// Hestenes rotations until every column pair is orthogonal to working
/// precision. Returns the rotated columns (column-major) and optionally V.
fn jacobi(a: &Matrix, want_v: bool) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    let (m, n) = a.shape();
    let mut w = a.to_col_major();
    let mut v = want_v.then(|| {
        let mut v = vec![0.0; n * n];
        for j in 0..n {
            v[j * n + j] = 1.0;
        }
        v
    });
    let tol = f64::EPSILON * (m as f64).sqrt();

    for _sweep in 0..MAX_SWEEPS {
        let mut sq: Vec<f64> = (0..n)
            .map(|j| {
                let c = &w[j * m..(j + 1) * m];
                dot(c, c)
            })
            .collect();
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in i + 1..n {
                let (alpha, beta) = (sq[i], sq[j]);
                let gamma = dot(&w[i * m..(i + 1) * m], &w[j * m..(j + 1) * m]);
                if gamma == 0.0 || gamma.abs() <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate(&mut w, m, i, j, c, s);
                if let Some(v) = v.as_mut() {
                    rotate(v, n, i, j, c, s);
                }
                sq[i] = (alpha - t * gamma).max(0.0);
                sq[j] = beta + t * gamma;
            }
        }
        if !rotated {
            return Ok((w, v));
        }
    }
    Err(Error::NoConvergence { sweeps: MAX_SWEEPS })
}

fn rotate(buf: &mut [f64], len: usize, i: usize, j: usize, c: f64, s: f64) {
    let (head, tail) = buf.split_at_mut(j * len);
    let ci = &mut head[i * len..(i + 1) * len];
    let cj = &mut tail[..len];
    for (x, y) in ci.iter_mut().zip(cj.iter_mut()) {
        let (xi, yj) = (*x, *y);
        *x = c * xi - s * yj;
        *y = s * xi + c * yj;
    }
}

fn descending_order(values: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    idx
}

/// Fills the empty slots of `cols` with unit vectors orthogonal to the rest.
fn complete_basis(cols: &mut [Vec<f64>], missing: &[usize], m: usize) {
    let mut candidate = 0;
    for &slot in missing {
        loop {
            assert!(candidate < m, "ran out of basis candidates");
            let mut e = vec![0.0; m];
            e[candidate] = 1.0;
            candidate += 1;
            for _ in 0..2 {
                for c in cols.iter().filter(|c| !c.is_empty()) {
                    let d = dot(c, &e);
                    for (ei, ci) in e.iter_mut().zip(c) {
                        *ei -= d * ci;
                    }
                }
            }
            let nrm = norm2(&e);
            if nrm > 0.5 {
                cols[slot] = e.into_iter().map(|x| x / nrm).collect();
                break;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::rng::{gaussian_matrix, RngSeed};

    #[test]
    fn diagonal_input() {
        let a = Matrix::from_diag(&[3.0, 2.0, 1.0]);
        let f = exact_svd(&a).unwrap();
        assert_eq!(f.sigma, vec![3.0, 2.0, 1.0]);
        for j in 0..3 {
            assert!((f.u[(j, j)].abs() - 1.0).abs() < 1e-15);
            assert!((f.v[(j, j)].abs() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn permutation_matrix() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let f = exact_svd(&a).unwrap();
        assert!((f.sigma[0] - 1.0).abs() < 1e-15 && (f.sigma[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn random_eigen_residuals() {
        let a = gaussian_matrix(20, 12, RngSeed(11));
        let f = exact_svd(&a).unwrap();
        let ata = a.t_matmul(&a).unwrap();
        let s1sq = f.sigma[0] * f.sigma[0];
        for j in 0..12 {
            let vj = f.v.column(j);
            let r: Vec<f64> = ata
                .matvec(&vj)
                .unwrap()
                .iter()
                .zip(&vj)
                .map(|(x, v)| x - f.sigma[j] * f.sigma[j] * v)
                .collect();
            assert!(norm2(&r) <= 1e-10 * s1sq);
        }
        assert!(f.u.orthonormality_defect() <= 1e-12);
        assert!(f.v.orthonormality_defect() <= 1e-12);
        assert!(f.reconstruct().sub(&a).unwrap().fro_norm() <= 1e-10 * a.fro_norm());
    }

    #[test]
    fn wide_input_transposes() {
        let a = gaussian_matrix(5, 9, RngSeed(12));
        let f = exact_svd(&a).unwrap();
        assert_eq!(f.u.shape(), (5, 5));
        assert_eq!(f.v.shape(), (9, 5));
        assert!(f.reconstruct().sub(&a).unwrap().fro_norm() <= 1e-12 * a.fro_norm());
    }

    #[test]
    fn rank_deficient_completes_u() {
        let mut a = Matrix::zeros(6, 3);
        a[(0, 0)] = 2.0;
        a[(1, 0)] = 1.0;
        let f = exact_svd(&a).unwrap();
        assert_eq!(f.sigma[1], 0.0);
        assert!(f.u.orthonormality_defect() <= 1e-14);
    }

    #[test]
    fn truncation_error_matches_tail() {
        let a = Matrix::from_diag(&[3.0, 2.0, 1.0]);
        let t = truncated_svd(&a, 2).unwrap();
        let err = a.sub(&t.reconstruct()).unwrap();
        assert!((err.fro_norm() - 1.0).abs() < 1e-15);
        assert!((two_norm(&err).unwrap() - 1.0).abs() < 1e-15);

        let b = gaussian_matrix(15, 10, RngSeed(13));
        let full = exact_svd(&b).unwrap();
        let t4 = truncated_svd(&b, 4).unwrap();
        let err2 = b.sub(&t4.reconstruct()).unwrap().fro_norm().powi(2);
        let tail: f64 = full.sigma[4..].iter().map(|s| s * s).sum();
        assert!((err2 - tail).abs() <= 1e-10 * tail);

        let t_all = truncated_svd(&b, 10).unwrap();
        assert!(b.sub(&t_all.reconstruct()).unwrap().fro_norm() <= 1e-12 * b.fro_norm());
        assert!(truncated_svd(&b, 11).is_err());
        assert!(truncated_svd(&b, 0).is_err());
    }

    #[test]
    fn values_only_agree_with_full() {
        let a = gaussian_matrix(11, 8, RngSeed(14));
        let s = singular_values(&a).unwrap();
        let f = exact_svd(&a).unwrap();
        for (x, y) in s.iter().zip(&f.sigma) {
            assert!((x - y).abs() <= 1e-13 * f.sigma[0]);
        }
    }
}
