//! Singular values through Householder bidiagonalization and implicit-shift
//! QR on the bidiagonal. Cheaper than Jacobi when vectors are not needed.

use super::matrix::{norm2, Matrix};
use crate::error::{Error, Result};

/// Diagonal `d` (length `n`) and superdiagonal `e` (length `n − 1`) of an
/// upper bidiagonal matrix orthogonally equivalent to `a` (`m ≥ n`).
pub fn bidiagonalize(a: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = a.shape();
    debug_assert!(m >= n);
    let mut w = a.clone();
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n.saturating_sub(1)];
    let mut acc = vec![0.0; n];

    for k in 0..n {
        // Left reflector on column k, rows k..m.
        let col: Vec<f64> = (k..m).map(|i| w[(i, k)]).collect();
        let (v, beta) = householder(&col);
        d[k] = beta;
        if let Some(v) = v {
            acc[k + 1..].iter_mut().for_each(|x| *x = 0.0);
            for (i, vi) in (k..m).zip(&v) {
                for (x, y) in acc[k + 1..].iter_mut().zip(&w.row(i)[k + 1..]) {
                    *x += vi * y;
                }
            }
            for (i, vi) in (k..m).zip(&v) {
                let f = 2.0 * vi;
                for (y, x) in w.row_mut(i)[k + 1..].iter_mut().zip(&acc[k + 1..]) {
                    *y -= f * x;
                }
            }
        }
        if k + 1 >= n {
            continue;
        }
        // Right reflector on row k, columns k+1..n.
        let row = w.row(k)[k + 1..].to_vec();
        let (u, beta) = householder(&row);
        e[k] = beta;
        if let Some(u) = u {
            for i in k + 1..m {
                let r = &mut w.row_mut(i)[k + 1..];
                let s = 2.0 * r.iter().zip(&u).map(|(x, y)| x * y).sum::<f64>();
                for (x, y) in r.iter_mut().zip(&u) {
                    *x -= s * y;
                }
            }
        }
    }
    (d, e)
}

/// Unit reflector `v` with `(I − 2vvᵀ)x = β e₁`; `None` when `x = 0`.
fn householder(x: &[f64]) -> (Option<Vec<f64>>, f64) {
    let alpha = norm2(x);
    if alpha == 0.0 {
        return (None, 0.0);
    }
    let beta = if x[0] >= 0.0 { -alpha } else { alpha };
    let mut v = x.to_vec();
    v[0] -= beta;
    let vn = norm2(&v);
    v.iter_mut().for_each(|t| *t /= vn);
    (Some(v), beta)
}

/// Singular values of the bidiagonal `(d, e)`, nonincreasing.
pub fn bidiagonal_values(mut d: Vec<f64>, mut e: Vec<f64>) -> Result<Vec<f64>> {
    let n = d.len();
    if n == 0 {
        return Ok(d);
    }
    let eps = f64::EPSILON;
    let anorm = (0..n)
        .map(|i| d[i].abs() + e.get(i).map_or(0.0, |x| x.abs()))
        .fold(0.0, f64::max);
    let small = eps * anorm;
    let max_iter = 100 * n * n.max(10);
    let mut hi = n - 1;
    let mut iter = 0;

    while hi > 0 {
        iter += 1;
        if iter > max_iter {
            return Err(Error::NoConvergence { sweeps: max_iter });
        }
        for i in 0..hi {
            if e[i].abs() <= eps * (d[i].abs() + d[i + 1].abs()) || e[i].abs() <= f64::MIN_POSITIVE {
                e[i] = 0.0;
            }
        }
        if e[hi - 1] == 0.0 {
            hi -= 1;
            continue;
        }
        let mut lo = hi - 1;
        while lo > 0 && e[lo - 1] != 0.0 {
            lo -= 1;
        }
        if let Some(z) = (lo..=hi).find(|&i| d[i].abs() <= small) {
            d[z] = 0.0;
            if z < hi {
                chase_row(&mut d, &mut e, z, hi);
            } else {
                chase_column(&mut d, &mut e, lo, hi);
            }
            continue;
        }
        qr_step(&mut d, &mut e, lo, hi);
    }
    let mut s: Vec<f64> = d.into_iter().map(f64::abs).collect();
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

fn givens(f: f64, g: f64) -> (f64, f64, f64) {
    let r = f.hypot(g);
    if r == 0.0 {
        (1.0, 0.0, 0.0)
    } else {
        (f / r, g / r, r)
    }
}

/// `d[z] = 0`: rotate row `z` against the rows below to clear `e[z]`.
fn chase_row(d: &mut [f64], e: &mut [f64], z: usize, hi: usize) {
    let mut f = e[z];
    e[z] = 0.0;
    for j in z + 1..=hi {
        let (c, s, r) = givens(d[j], f);
        d[j] = r;
        if j < hi {
            f = -s * e[j];
            e[j] *= c;
        }
    }
}

/// `d[hi] = 0`: rotate column `hi` against the columns to its left.
fn chase_column(d: &mut [f64], e: &mut [f64], lo: usize, hi: usize) {
    let mut f = e[hi - 1];
    e[hi - 1] = 0.0;
    for j in (lo..hi).rev() {
        let (c, s, r) = givens(d[j], f);
        d[j] = r;
        if j > lo {
            f = -s * e[j - 1];
            e[j - 1] *= c;
        }
    }
}

/// One Golub–Kahan step with a Wilkinson shift on the unreduced block
/// `lo..=hi`.
fn qr_step(d: &mut [f64], e: &mut [f64], lo: usize, hi: usize) {
    let (dm, dn, em) = (d[hi - 1], d[hi], e[hi - 1]);
    let el = if hi - 1 > lo { e[hi - 2] } else { 0.0 };
    let t11 = dm * dm + el * el;
    let t12 = dm * em;
    let t22 = dn * dn + em * em;
    let delta = 0.5 * (t11 - t22);
    let denom = delta + if delta >= 0.0 { 1.0 } else { -1.0 } * delta.hypot(t12);
    let mu = if denom == 0.0 { t22 } else { t22 - t12 * t12 / denom };

    let mut y = d[lo] * d[lo] - mu;
    let mut z = d[lo] * e[lo];
    for k in lo..hi {
        let (c, s, r) = givens(y, z);
        if k > lo {
            e[k - 1] = r;
        }
        y = c * d[k] + s * e[k];
        e[k] = -s * d[k] + c * e[k];
        z = s * d[k + 1];
        d[k + 1] *= c;

        let (c, s, r) = givens(y, z);
        d[k] = r;
        y = c * e[k] + s * d[k + 1];
        d[k + 1] = -s * e[k] + c * d[k + 1];
        if k + 1 < hi {
            z = s * e[k + 1];
            e[k + 1] *= c;
        }
    }
    e[hi - 1] = y;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::rng::{gaussian_matrix, RngSeed};
    use crate::densela::svd::exact_svd;

    fn check(a: &Matrix) {
        let (d, e) = bidiagonalize(a);
        let s = bidiagonal_values(d, e).unwrap();
        let f = exact_svd(a).unwrap();
        let scale = f.sigma[0].max(f64::MIN_POSITIVE);
        for (x, y) in s.iter().zip(&f.sigma) {
            assert!((x - y).abs() <= 1e-13 * scale, "{x} vs {y}");
        }
    }

    #[test]
    fn bidiagonal_preserves_frobenius() {
        let a = gaussian_matrix(13, 7, RngSeed(2));
        let (d, e) = bidiagonalize(&a);
        let f2: f64 = d.iter().chain(&e).map(|x| x * x).sum();
        assert!((f2.sqrt() - a.fro_norm()).abs() <= 1e-13 * a.fro_norm());
    }

    #[test]
    fn matches_jacobi() {
        check(&gaussian_matrix(30, 30, RngSeed(1)));
        check(&gaussian_matrix(41, 17, RngSeed(2)));
        check(&Matrix::from_diag(&[1.0, 1e-8, 3.0, 0.0, 2.0]));
        check(&Matrix::zeros(4, 3));
        check(&Matrix::identity(9));
        let g = gaussian_matrix(25, 3, RngSeed(3));
        check(&g.matmul(&g.transpose()).unwrap());
        let graded = Matrix::from_fn(20, 20, |i, j| 0.5f64.powi((i + j) as i32) * ((i * 3 + j) as f64).cos());
        check(&graded);
        check(&Matrix::from_rows(&[vec![5.0]]).unwrap());
    }

    #[test]
    fn zero_diagonal_entries_deflate() {
        let s = bidiagonal_values(vec![1.0, 0.0, 2.0, 0.0], vec![1.0, 1.0, 1.0]).unwrap();
        let mut b = Matrix::zeros(4, 4);
        for (i, x) in [1.0, 0.0, 2.0, 0.0].iter().enumerate() {
            b[(i, i)] = *x;
        }
        for i in 0..3 {
            b[(i, i + 1)] = 1.0;
        }
        let f = exact_svd(&b).unwrap();
        for (x, y) in s.iter().zip(&f.sigma) {
            assert!((x - y).abs() <= 1e-14 * f.sigma[0]);
        }
    }
}
