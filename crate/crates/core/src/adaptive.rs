//! Adaptive subspace iteration: keep appending Gaussian samples until the
//! singular-value ratio of the current sketch meets a tolerance.

use serde::{Deserialize, Serialize};

use crate::densela::{dot, exact_svd, norm2, singular_values, GaussianStream, Matrix, QrFactors};
use crate::error::{Error, Result};
use crate::normest::LinearOperator;
use crate::sketch::{power_basis, Counted, LowRankApprox};
use crate::RngSeed;

/// A column whose residual after orthogonalization falls below this
/// fraction of its original norm is dropped.
pub const DROP_TOL: f64 = 1e-14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveConfig {
    pub k: usize,
    pub q: usize,
    /// Accuracy target; the loop stops once the error proxy is `≤ √tau`.
    pub tau: f64,
    pub delta: f64,
    /// Smallest batch appended per round.
    pub b: usize,
    /// Extra samples in the first sketch.
    pub c: usize,
    /// Hard ceiling on the total number of samples.
    pub cmax: usize,
    pub seed: RngSeed,
}

impl AdaptiveConfig {
    pub fn new(k: usize, q: usize, tau: f64, cmax: usize, seed: impl Into<RngSeed>) -> Self {
        Self {
            k,
            q,
            tau,
            delta: 0.05,
            b: 5,
            c: 5,
            cmax,
            seed: seed.into(),
        }
    }

    /// `⌈log₁₀(2/Δ)⌉`.
    pub fn p(&self) -> Result<usize> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        Ok((2.0 / self.delta).log10().ceil() as usize)
    }

    pub fn initial_ell(&self) -> Result<usize> {
        Ok(self.c + self.k + self.p()?)
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let ell0 = self.initial_ell()?;
        if self.k == 0 {
            return Err(Error::InvalidArgument("k must be positive".into()));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "tau must lie in (0, 1), got {}",
                self.tau
            )));
        }
        if self.b == 0 {
            return Err(Error::InvalidArgument("batch size b must be >= 1".into()));
        }
        if self.cmax <= ell0 || self.cmax > m.min(n) {
            return Err(Error::InvalidArgument(format!(
                "need c + k + p = {ell0} < cmax <= min(m, n) = {}, got cmax={}",
                m.min(n),
                self.cmax
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveRound {
    /// Samples drawn so far.
    pub ell: usize,
    /// Samples appended this round (the initial sketch for round 0).
    pub delta_ell: usize,
    /// `(σ_{ℓ−p+1}(B)/σ_k(B))^{2q+1}`.
    pub error_proxy: f64,
    /// Cumulative matvecs.
    pub matvec_count: usize,
    pub basis_rank: usize,
    pub dropped: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaptiveStatus {
    Converged,
    CeilingHit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptiveTrace {
    pub p: usize,
    pub rounds: Vec<AdaptiveRound>,
    pub status: AdaptiveStatus,
    /// Batch size that would have crossed `cmax`, when the ceiling was hit.
    pub rejected_delta_ell: Option<usize>,
    pub matvec_count: usize,
}

impl AdaptiveTrace {
    pub fn final_ell(&self) -> usize {
        self.rounds.last().map_or(0, |r| r.ell)
    }

    pub fn final_error_proxy(&self) -> f64 {
        self.rounds.last().map_or(f64::INFINITY, |r| r.error_proxy)
    }
}

#[derive(Debug, Clone)]
pub struct AdaptiveResult {
    pub approx: LowRankApprox,
    pub trace: AdaptiveTrace,
}

/// Error proxy from the singular values of the current `B`.
pub fn error_proxy(b_sigma: &[f64], k: usize, ell: usize, p: usize, q: usize) -> f64 {
    let at = |j: usize| b_sigma.get(j - 1).copied().unwrap_or(0.0);
    let (num, den) = (at(ell - p + 1), at(k));
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).powi(2 * q as i32 + 1)
}

/// Samples to add so that, under a power-law decay model fitted to the
/// current proxy, the next proxy lands at `√tau`. Falls back to `b` when the
/// proxy shows no decay.
pub fn next_batch(e: f64, tau: f64, k: usize, ell: usize, p: usize, b: usize) -> usize {
    if !(e > 0.0 && e < 1.0) {
        return b;
    }
    let s = (ell - p + 1) as f64;
    let expo = (tau.sqrt() / e).ln() / e.ln();
    let grow = (((s / k as f64).powf(expo) - 1.0) * s).ceil();
    if grow.is_finite() && grow > b as f64 {
        grow.min(usize::MAX as f64 / 2.0) as usize
    } else {
        b
    }
}

/// Enlarged basis. `q·r` reproduces `[existing.q·existing.r, new]` up to the
/// residuals of dropped columns.
#[derive(Debug, Clone)]
pub struct BasisUpdate {
    pub q: Matrix,
    pub r: Matrix,
    pub added: usize,
    pub dropped: usize,
}

/// Appends `new_cols` to an orthonormal basis, two passes of classical
/// Gram–Schmidt per column.
pub fn incremental_basis_update(existing: &QrFactors, new_cols: &Matrix) -> Result<BasisUpdate> {
    let m = existing.q.rows();
    if new_cols.rows() != m {
        return Err(Error::DimensionMismatch(format!(
            "new columns have {} rows, basis has {m}",
            new_cols.rows()
        )));
    }
    let old = existing.q.cols();
    let mut basis: Vec<Vec<f64>> = (0..old).map(|j| existing.q.column(j)).collect();
    let mut coeffs: Vec<Vec<f64>> = Vec::with_capacity(new_cols.cols());
    let mut dropped = 0;

    for j in 0..new_cols.cols() {
        let mut x = new_cols.column(j);
        let orig = norm2(&x);
        let mut c = vec![0.0; basis.len()];
        for _ in 0..2 {
            let h: Vec<f64> = basis.iter().map(|u| dot(u, &x)).collect();
            for (u, hi) in basis.iter().zip(&h) {
                for (xi, ui) in x.iter_mut().zip(u) {
                    *xi -= hi * ui;
                }
            }
            for (ci, hi) in c.iter_mut().zip(&h) {
                *ci += hi;
            }
        }
        let res = norm2(&x);
        if orig == 0.0 || res <= DROP_TOL * orig {
            dropped += 1;
        } else {
            x.iter_mut().for_each(|t| *t /= res);
            basis.push(x);
            c.push(res);
        }
        coeffs.push(c);
    }

    let rank = basis.len();
    let total = existing.r.cols() + new_cols.cols();
    let mut r = Matrix::zeros(rank, total);
    for i in 0..existing.r.rows() {
        for jj in 0..existing.r.cols() {
            r[(i, jj)] = existing.r[(i, jj)];
        }
    }
    for (j, c) in coeffs.iter().enumerate() {
        for (i, v) in c.iter().enumerate() {
            r[(i, existing.r.cols() + j)] = *v;
        }
    }
    Ok(BasisUpdate {
        q: Matrix::from_columns(&basis),
        r,
        added: rank - old,
        dropped,
    })
}

/// Grows the sample count until `(σ_{ℓ−p+1}(B)/σ_k(B))^{2q+1} ≤ √tau` or the
/// next batch would exceed `cmax`. New columns get the same `q` power steps
/// as the initial block. The approximation from the last completed round is
/// returned either way.
pub fn adaptive_rsi<O: LinearOperator + ?Sized>(a: &O, cfg: &AdaptiveConfig) -> Result<AdaptiveResult> {
    let (m, n) = (a.rows(), a.cols());
    cfg.validate(m, n)?;
    let p = cfg.p()?;
    let target = cfg.tau.sqrt();
    let counted = Counted::new(a);
    let mut stream = GaussianStream::new(cfg.seed);

    let mut ell = cfg.initial_ell()?;
    let omega = stream.matrix(n, ell);
    let pb = power_basis(&counted, &omega, cfg.q, 1)?;
    let rank_deficient_steps = pb.collapsed;
    let mut basis = pb.qr;
    let mut b = counted.apply_transpose_block(&basis.q).transpose();
    let mut sigma = singular_values(&b)?;
    let mut e = error_proxy(&sigma, cfg.k, ell, p, cfg.q);
    let mut rounds = vec![AdaptiveRound {
        ell,
        delta_ell: ell,
        error_proxy: e,
        matvec_count: counted.count(),
        basis_rank: basis.q.cols(),
        dropped: 0,
    }];
    let mut status = AdaptiveStatus::Converged;
    let mut rejected = None;

    while e > target {
        let d = next_batch(e, cfg.tau, cfg.k, ell, p, cfg.b);
        if ell + d > cfg.cmax {
            status = AdaptiveStatus::CeilingHit;
            rejected = Some(d);
            break;
        }
        let omega_new = stream.matrix(n, d);
        let fresh = power_basis(&counted, &omega_new, cfg.q, 1)?;
        let up = incremental_basis_update(&basis, &fresh.qr.q)?;
        if up.added > 0 {
            let q_added = up.q.columns(up.q.cols() - up.added, up.q.cols());
            let b_added = counted.apply_transpose_block(&q_added).transpose();
            b = stack_rows(&b, &b_added);
        }
        basis = QrFactors { q: up.q, r: up.r };
        ell += d;
        sigma = singular_values(&b)?;
        e = error_proxy(&sigma, cfg.k, ell, p, cfg.q);
        rounds.push(AdaptiveRound {
            ell,
            delta_ell: d,
            error_proxy: e,
            matvec_count: counted.count(),
            basis_rank: basis.q.cols(),
            dropped: up.dropped,
        });
    }

    let svd = exact_svd(&b)?;
    let k = cfg.k;
    let approx = LowRankApprox {
        core_u: svd.u.columns(0, k),
        sigma_hat: svd.sigma[..k].to_vec(),
        v_hat: svd.v.columns(0, k),
        b_sigma: svd.sigma,
        q_basis: basis.q,
        matvec_count: counted.count(),
        rank_deficient_steps,
        omega_diagnostics: None,
    };
    Ok(AdaptiveResult {
        approx,
        trace: AdaptiveTrace {
            p,
            rounds,
            status,
            rejected_delta_ell: rejected,
            matvec_count: counted.count(),
        },
    })
}

fn stack_rows(top: &Matrix, bottom: &Matrix) -> Matrix {
    let mut rows = top.to_rows();
    rows.extend(bottom.to_rows());
    Matrix::from_rows(&rows).expect("equal widths")
}
