//! Randomized range finders: basic sketching, subspace iteration with
//! stabilized power steps, the power method, and the two-stage small-rank
//! variant.
//!
//! Every routine works for any shape as long as `ell ≤ min(m, n)`; nothing
//! here transposes. Matvecs are counted in column-applications of `A` or
//! `Aᵀ`.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::bounds::oversampling_p;
use crate::densela::{
    exact_svd, gaussian_matrix, norm2, qr_factor, singular_values, two_norm, GaussianStream,
    Matrix, QrFactors, RngSeed,
};
use crate::error::{Error, Result};
use crate::normest::LinearOperator;

/// Relative size of an R diagonal entry below which a QR step is treated as
/// having lost rank.
pub const RANK_COLLAPSE_TOL: f64 = 1e-14;
/// `Ω̂₁` counts as full row rank when `σ_min(Ω̂₁) > ROW_RANK_TOL·max(σ₁(Ω̂₁), ‖Ω‖₂)`.
pub const ROW_RANK_TOL: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SketchConfig {
    pub k: usize,
    pub ell: usize,
    pub q: usize,
    /// Analysis split of the oversampling; `None` means
    /// `min(ell − k, oversampling_p(delta))`.
    pub p: Option<usize>,
    pub delta: f64,
    pub seed: RngSeed,
    pub reorth_period: usize,
}

impl SketchConfig {
    pub const DEFAULT_DELTA: f64 = 0.05;

    pub fn new(k: usize, ell: usize, q: usize, seed: impl Into<RngSeed>) -> Self {
        Self {
            k,
            ell,
            q,
            p: None,
            delta: Self::DEFAULT_DELTA,
            seed: seed.into(),
            reorth_period: 1,
        }
    }

    pub fn with_p(mut self, p: usize) -> Self {
        self.p = Some(p);
        self
    }

    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta = delta;
        self
    }

    pub fn with_seed(mut self, seed: impl Into<RngSeed>) -> Self {
        self.seed = seed.into();
        self
    }

    pub fn with_reorth_period(mut self, period: usize) -> Self {
        self.reorth_period = period;
        self
    }

    /// Resolved oversampling split.
    pub fn p(&self) -> usize {
        match self.p {
            Some(p) => p,
            None => oversampling_p(self.delta)
                .unwrap_or(0)
                .min(self.ell.saturating_sub(self.k)),
        }
    }

    /// Checks the configuration against an `m × n` operand.
    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        let r = m.min(n);
        if self.k == 0 || self.k > self.ell || self.ell > r {
            return Err(Error::InvalidArgument(format!(
                "need 0 < k <= ell <= min(m, n); got k={}, ell={}, shape {m}x{n}",
                self.k, self.ell
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if self.p() > self.ell - self.k {
            return Err(Error::InvalidArgument(format!(
                "p={} exceeds ell - k = {}",
                self.p(),
                self.ell - self.k
            )));
        }
        if self.reorth_period == 0 {
            return Err(Error::InvalidArgument("reorth_period must be >= 1".into()));
        }
        Ok(())
    }
}

/// `Ω̂ = VᵀΩ` split after row `ell − p`, with the norms every deterministic
/// bound needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OmegaDiagnostics {
    pub ell: usize,
    pub p: usize,
    pub omega2_norm: f64,
    pub omega1_pinv_norm: f64,
    pub omega1_sigma_min: f64,
    pub full_row_rank: bool,
}

/// Rank-`k` approximation `Q·core_u·diag(sigma_hat)·v_hatᵀ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowRankApprox {
    pub q_basis: Matrix,
    pub core_u: Matrix,
    pub sigma_hat: Vec<f64>,
    pub v_hat: Matrix,
    pub matvec_count: usize,
    /// All singular values of `B = QᵀA`.
    pub b_sigma: Vec<f64>,
    /// Half-steps (0 = `AΩ`) whose QR lost numerical rank.
    pub rank_deficient_steps: Vec<usize>,
    pub omega_diagnostics: Option<OmegaDiagnostics>,
}

impl LowRankApprox {
    pub fn k(&self) -> usize {
        self.sigma_hat.len()
    }

    /// `Q·core_u`, the approximate left singular vectors.
    pub fn left_vectors(&self) -> Matrix {
        self.q_basis.matmul(&self.core_u).expect("factor shapes agree")
    }

    /// The dense `m × n` product `Q B_k`.
    pub fn reconstruct(&self) -> Matrix {
        self.left_vectors()
            .scale_columns(&self.sigma_hat)
            .matmul(&self.v_hat.transpose())
            .expect("factor shapes agree")
    }

    pub fn residual(&self, a: &Matrix) -> Result<Matrix> {
        a.sub(&self.reconstruct())
    }

    pub fn error_fro(&self, a: &Matrix) -> Result<f64> {
        Ok(self.residual(a)?.fro_norm())
    }

    pub fn error_two(&self, a: &Matrix) -> Result<f64> {
        two_norm(&self.residual(a)?)
    }
}

/// Wraps an operator and tallies column-applications.
pub(crate) struct Counted<'a, O: ?Sized> {
    op: &'a O,
    cols: Cell<usize>,
}

impl<'a, O: LinearOperator + ?Sized> Counted<'a, O> {
    pub(crate) fn new(op: &'a O) -> Self {
        Self {
            op,
            cols: Cell::new(0),
        }
    }

    pub(crate) fn count(&self) -> usize {
        self.cols.get()
    }

    fn bump(&self, by: usize) {
        self.cols.set(self.cols.get() + by);
    }
}

impl<O: LinearOperator + ?Sized> LinearOperator for Counted<'_, O> {
    fn rows(&self) -> usize {
        self.op.rows()
    }
    fn cols(&self) -> usize {
        self.op.cols()
    }
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.bump(1);
        self.op.apply(x)
    }
    fn apply_transpose(&self, y: &[f64]) -> Vec<f64> {
        self.bump(1);
        self.op.apply_transpose(y)
    }
    fn apply_block(&self, x: &Matrix) -> Matrix {
        self.bump(x.cols());
        self.op.apply_block(x)
    }
    fn apply_transpose_block(&self, y: &Matrix) -> Matrix {
        self.bump(y.cols());
        self.op.apply_transpose_block(y)
    }
}

pub(crate) struct PowerBasis {
    pub qr: QrFactors,
    pub collapsed: Vec<usize>,
}

fn collapse_check(f: &QrFactors, y_fro: f64) -> Option<(f64, f64)> {
    let threshold = RANK_COLLAPSE_TOL * y_fro;
    let worst = f.r_diagonal().into_iter().fold(f64::INFINITY, f64::min);
    (y_fro == 0.0 || worst < threshold).then_some((worst, threshold))
}

fn check_omega(omega: &Matrix) -> Result<()> {
    let f = qr_factor(omega)?;
    if let Some((diag, threshold)) = collapse_check(&f, omega.fro_norm()) {
        return Err(Error::RankCollapse {
            step: 0,
            diag,
            threshold,
        });
    }
    Ok(())
}

/// Orthonormal basis of `(AAᵀ)^q AΩ`, re-orthogonalizing at half-steps that
/// are multiples of `reorth_period` and always at the last one. Rank loss
/// after the first product is recorded rather than raised.
pub(crate) fn power_basis<O: LinearOperator + ?Sized>(
    op: &O,
    omega: &Matrix,
    q: usize,
    reorth_period: usize,
) -> Result<PowerBasis> {
    if omega.rows() != op.cols() {
        return Err(Error::DimensionMismatch(format!(
            "omega has {} rows, operator has {} columns",
            omega.rows(),
            op.cols()
        )));
    }
    if omega.cols() > op.rows().min(op.cols()) {
        return Err(Error::InvalidArgument(format!(
            "{} samples exceed min(m, n) = {}",
            omega.cols(),
            op.rows().min(op.cols())
        )));
    }
    if reorth_period == 0 {
        return Err(Error::InvalidArgument("reorth_period must be >= 1".into()));
    }
    check_omega(omega)?;

    let last = 2 * q;
    let mut y = op.apply_block(omega);
    let mut collapsed = Vec::new();
    let mut out = None;
    for s in 0..=last {
        if s > 0 {
            y = if s % 2 == 1 {
                op.apply_transpose_block(&y)
            } else {
                op.apply_block(&y)
            };
        }
        if s % reorth_period == 0 || s == last {
            let f = qr_factor(&y)?;
            if collapse_check(&f, y.fro_norm()).is_some() {
                collapsed.push(s);
            }
            y = f.q.clone();
            if s == last {
                out = Some(f);
            }
        }
    }
    Ok(PowerBasis {
        qr: out.expect("last half-step always factors"),
        collapsed,
    })
}

/// Orthonormal basis of `(AAᵀ)^q AΩ` with QR re-orthogonalization every
/// `reorth_period` half-steps. Fails with the half-step index if any
/// factorization loses rank.
pub fn stabilized_power_basis<O: LinearOperator + ?Sized>(
    a: &O,
    omega: &Matrix,
    q: usize,
    reorth_period: usize,
) -> Result<QrFactors> {
    let pb = power_basis(a, omega, q, reorth_period)?;
    if let Some(&step) = pb.collapsed.first() {
        return Err(Error::RankCollapse {
            step,
            diag: pb.qr.r_diagonal().into_iter().fold(f64::INFINITY, f64::min),
            threshold: RANK_COLLAPSE_TOL,
        });
    }
    Ok(pb.qr)
}

fn sketch_with_omega<O: LinearOperator + ?Sized>(
    a: &O,
    omega: &Matrix,
    k: usize,
    q: usize,
    reorth_period: usize,
) -> Result<LowRankApprox> {
    let counted = Counted::new(a);
    let pb = power_basis(&counted, omega, q, reorth_period)?;
    let q_basis = pb.qr.q;
    let b = counted.apply_transpose_block(&q_basis).transpose();
    let svd = exact_svd(&b)?;
    Ok(LowRankApprox {
        core_u: svd.u.columns(0, k),
        sigma_hat: svd.sigma[..k].to_vec(),
        v_hat: svd.v.columns(0, k),
        b_sigma: svd.sigma,
        q_basis,
        matvec_count: counted.count(),
        rank_deficient_steps: pb.collapsed,
        omega_diagnostics: None,
    })
}

/// One pass: `Q = orth(AΩ)` for Gaussian `Ω`, then the rank-`k` truncation
/// of `QᵀA`. Uses `2·ell` matvecs.
pub fn basic_randomized<O: LinearOperator + ?Sized>(
    a: &O,
    k: usize,
    ell: usize,
    seed: RngSeed,
) -> Result<LowRankApprox> {
    let (m, n) = (a.rows(), a.cols());
    if k == 0 || k >= ell || ell > m.min(n) {
        return Err(Error::InvalidArgument(format!(
            "need 0 < k < ell <= min(m, n); got k={k}, ell={ell}, shape {m}x{n}"
        )));
    }
    let omega = gaussian_matrix(n, ell, seed);
    sketch_with_omega(a, &omega, k, 0, 1)
}

/// Subspace iteration from a caller-supplied start block `omega` (`n × ell`).
pub fn subspace_iteration<O: LinearOperator + ?Sized>(
    a: &O,
    omega: &Matrix,
    cfg: &SketchConfig,
) -> Result<LowRankApprox> {
    cfg.validate(a.rows(), a.cols())?;
    if omega.cols() != cfg.ell {
        return Err(Error::DimensionMismatch(format!(
            "omega has {} columns, config says ell={}",
            omega.cols(),
            cfg.ell
        )));
    }
    sketch_with_omega(a, omega, cfg.k, cfg.q, cfg.reorth_period)
}

/// Splits `VᵀΩ` after row `ell − p`. `v` must hold all `n` right singular
/// vectors of `A` (the oracle's full `V`).
pub fn omega_diagnostics(v: &Matrix, omega: &Matrix, p: usize) -> Result<OmegaDiagnostics> {
    let (n, ell) = omega.shape();
    if v.rows() != n {
        return Err(Error::DimensionMismatch(format!(
            "V has {} rows, omega has {n}",
            v.rows()
        )));
    }
    if p >= ell {
        return Err(Error::InvalidArgument(format!("p={p} must be below ell={ell}")));
    }
    let hat = v.t_matmul(omega)?;
    let split = ell - p;
    let top = hat.row_range(0, split);
    let omega2_norm = if split < hat.rows() {
        two_norm(&hat.row_range(split, hat.rows()))?
    } else {
        0.0
    };
    let s = singular_values(&top)?;
    let smin = s[split - 1];
    let scale = s[0].max(two_norm(omega)?);
    let full_row_rank = smin > ROW_RANK_TOL * scale;
    Ok(OmegaDiagnostics {
        ell,
        p,
        omega2_norm,
        omega1_pinv_norm: if smin > 0.0 { 1.0 / smin } else { f64::INFINITY },
        omega1_sigma_min: smin,
        full_row_rank,
    })
}

/// [`subspace_iteration`] plus the `Ω̂` diagnostics against the oracle `V`.
/// Fails if `Ω̂₁` is not of full row rank.
pub fn subspace_iteration_diagnosed(
    a: &Matrix,
    omega: &Matrix,
    cfg: &SketchConfig,
    oracle_v: &Matrix,
) -> Result<LowRankApprox> {
    let mut approx = subspace_iteration(a, omega, cfg)?;
    let d = omega_diagnostics(oracle_v, omega, cfg.p())?;
    if !d.full_row_rank {
        return Err(Error::RowRankDeficient {
            sigma_min: d.omega1_sigma_min,
        });
    }
    approx.omega_diagnostics = Some(d);
    Ok(approx)
}

/// Subspace iteration from a Gaussian start drawn from `cfg.seed`; uses
/// `(2q+2)·ell` matvecs.
pub fn randomized_subspace_iteration<O: LinearOperator + ?Sized>(
    a: &O,
    cfg: &SketchConfig,
) -> Result<LowRankApprox> {
    cfg.validate(a.rows(), a.cols())?;
    let omega = gaussian_matrix(a.cols(), cfg.ell, cfg.seed);
    sketch_with_omega(a, &omega, cfg.k, cfg.q, cfg.reorth_period)
}

pub fn randomized_subspace_iteration_diagnosed(
    a: &Matrix,
    cfg: &SketchConfig,
    oracle_v: &Matrix,
) -> Result<LowRankApprox> {
    let omega = gaussian_matrix(a.cols(), cfg.ell, cfg.seed);
    subspace_iteration_diagnosed(a, &omega, cfg, oracle_v)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerEstimate {
    pub norm_estimate: f64,
    pub matvec_count: usize,
}

/// `‖Aᵀy‖` for `y` the normalized `(AAᵀ)^i Aω`, for every `i = 0..=max_q`.
/// Entry `i` equals [`power_method`] with `q = i`.
pub fn power_trace<O: LinearOperator + ?Sized>(
    a: &O,
    omega: &[f64],
    max_q: usize,
) -> Result<Vec<PowerEstimate>> {
    if omega.len() != a.cols() {
        return Err(Error::DimensionMismatch(format!(
            "start vector of length {} for {} columns",
            omega.len(),
            a.cols()
        )));
    }
    if !omega.iter().all(|v| v.is_finite()) || norm2(omega) == 0.0 {
        return Err(Error::InvalidArgument(
            "start vector must be finite and nonzero".into(),
        ));
    }
    let normalize = |v: Vec<f64>| {
        let s = norm2(&v);
        if s > 0.0 {
            v.into_iter().map(|x| x / s).collect()
        } else {
            v
        }
    };
    let mut out = Vec::with_capacity(max_q + 1);
    let mut y = normalize(a.apply(omega));
    let mut count = 1;
    for i in 0..=max_q {
        let z = a.apply_transpose(&y);
        count += 1;
        let est = norm2(&z);
        out.push(PowerEstimate {
            norm_estimate: est,
            matvec_count: count,
        });
        if i < max_q {
            y = normalize(a.apply(&normalize(z)));
            count += 1;
        }
    }
    Ok(out)
}

/// Power method: `2q + 2` matvecs.
pub fn power_method<O: LinearOperator + ?Sized>(
    a: &O,
    omega: &[f64],
    q: usize,
) -> Result<PowerEstimate> {
    Ok(*power_trace(a, omega, q)?.last().expect("nonempty trace"))
}

pub fn randomized_power_method<O: LinearOperator + ?Sized>(
    a: &O,
    q: usize,
    seed: RngSeed,
) -> Result<PowerEstimate> {
    let omega = GaussianStream::new(seed).vector(a.cols());
    power_method(a, &omega, q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceStep {
    pub q: usize,
    pub matvec_count: usize,
    /// Singular values of `QᵀA` after `q` power steps.
    pub sigma: Vec<f64>,
}

/// Singular values of `B` for every `q = 0..=max_q` from one start block,
/// sharing the products between consecutive `q`. Matches
/// [`subspace_iteration`] with `reorth_period = 1`.
pub fn subspace_trace<O: LinearOperator + ?Sized>(
    a: &O,
    omega: &Matrix,
    max_q: usize,
) -> Result<Vec<SubspaceStep>> {
    let counted = Counted::new(a);
    let mut q_basis = power_basis(&counted, omega, 0, 1)?.qr.q;
    let mut out = Vec::with_capacity(max_q + 1);
    for q in 0..=max_q {
        let z = counted.apply_transpose_block(&q_basis);
        out.push(SubspaceStep {
            q,
            matvec_count: counted.count(),
            sigma: singular_values(&z)?,
        });
        if q < max_q {
            let zq = qr_factor(&z)?.q;
            q_basis = qr_factor(&counted.apply_block(&zq))?.q;
        }
    }
    Ok(out)
}

/// Two stages: a one-pass sketch with `ell1` samples for a rank-`ell2`
/// approximation, then subspace iteration started from its `ell2` right
/// singular vectors.
pub fn improved_small_k<O: LinearOperator + ?Sized>(
    a: &O,
    k: usize,
    ell1: usize,
    ell2: usize,
    q: usize,
    seed: RngSeed,
) -> Result<LowRankApprox> {
    if !(ell1 > ell2 && ell2 >= k && k >= 1) {
        return Err(Error::InvalidArgument(format!(
            "need ell1 > ell2 >= k >= 1; got ell1={ell1}, ell2={ell2}, k={k}"
        )));
    }
    let stage1 = basic_randomized(a, ell2, ell1, seed)?;
    let cfg = SketchConfig::new(k, ell2, q, seed).with_p(0);
    let mut out = subspace_iteration(a, &stage1.v_hat, &cfg)?;
    out.matvec_count += stage1.matvec_count;
    Ok(out)
}

/// Leading singular value estimate of [`improved_small_k`] (with
/// `k = ell2 = 1`) for every `q = 0..=max_q`, counting stage-one matvecs.
pub fn small_k_trace<O: LinearOperator + ?Sized>(
    a: &O,
    ell1: usize,
    max_q: usize,
    seed: RngSeed,
) -> Result<Vec<PowerEstimate>> {
    let stage1 = basic_randomized(a, 1, ell1, seed)?;
    let mut trace = power_trace(a, &stage1.v_hat.column(0), max_q)?;
    for t in trace.iter_mut() {
        t.matvec_count += stage1.matvec_count;
    }
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::densela::{dot, truncated_svd, SvdFactors};
    use proptest::prelude::*;

    /// Largest sine of the principal angles between two orthonormal bases.
    fn max_principal_sine(q1: &Matrix, q2: &Matrix) -> f64 {
        let proj = q1.matmul(&q1.t_matmul(q2).unwrap()).unwrap();
        two_norm(&q2.sub(&proj).unwrap()).unwrap()
    }

    fn diag_decay(n: usize, r: f64) -> Matrix {
        Matrix::from_diag(&(0..n).map(|i| r.powi(i as i32)).collect::<Vec<_>>())
    }

    #[test]
    fn q0_basis_spans_a_omega() {
        let a = gaussian_matrix(30, 20, RngSeed(1));
        let omega = gaussian_matrix(20, 5, RngSeed(2));
        let f = stabilized_power_basis(&a, &omega, 0, 1).unwrap();
        let g = qr_factor(&a.matmul(&omega).unwrap()).unwrap();
        assert!(max_principal_sine(&f.q, &g.q) <= 1e-12);
    }

    #[test]
    fn full_space_basis() {
        let a = Matrix::from_diag(&[2.0, 1.0]);
        let f = stabilized_power_basis(&a, &Matrix::identity(2), 3, 1).unwrap();
        assert_eq!(f.q.shape(), (2, 2));
        assert!(f.q.orthonormality_defect() <= 1e-15);
    }

    #[test]
    fn power_basis_matches_explicit_product() {
        let a = gaussian_matrix(30, 20, RngSeed(3));
        let omega = gaussian_matrix(20, 5, RngSeed(4));
        let aat = a.matmul(&a.transpose()).unwrap();
        let y = aat.matmul(&aat).unwrap().matmul(&a).unwrap().matmul(&omega).unwrap();
        let oracle = qr_factor(&y).unwrap().q;
        for period in [1, 2, 5] {
            let f = stabilized_power_basis(&a, &omega, 2, period).unwrap();
            assert!(max_principal_sine(&f.q, &oracle) <= 1e-8, "period {period}");
        }
    }

    #[test]
    fn dependent_omega_is_rejected() {
        let a = gaussian_matrix(10, 8, RngSeed(5));
        let c = gaussian_matrix(8, 1, RngSeed(6));
        let omega = c.hstack(&c).unwrap();
        assert!(matches!(
            stabilized_power_basis(&a, &omega, 1, 1),
            Err(Error::RankCollapse { step: 0, .. })
        ));
    }

    #[test]
    fn collapse_after_first_product_reported_by_primitive() {
        let mut a = Matrix::zeros(8, 6);
        a[(0, 0)] = 1.0;
        let omega = gaussian_matrix(6, 3, RngSeed(7));
        assert!(matches!(
            stabilized_power_basis(&a, &omega, 1, 1),
            Err(Error::RankCollapse { .. })
        ));
    }

    #[test]
    fn basic_on_identity() {
        let a = Matrix::identity(12);
        let r = basic_randomized(&a, 3, 6, RngSeed(8)).unwrap();
        for s in &r.sigma_hat {
            assert!((s - 1.0).abs() < 1e-12);
        }
        assert!((r.error_two(&a).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(r.matvec_count, 12);
    }

    #[test]
    fn basic_captures_exact_rank() {
        let u = gaussian_matrix(40, 3, RngSeed(9));
        let v = gaussian_matrix(30, 3, RngSeed(10));
        let a = u.matmul(&v.transpose()).unwrap();
        let r = basic_randomized(&a, 3, 8, RngSeed(11)).unwrap();
        assert!(r.error_fro(&a).unwrap() <= 1e-10 * a.fro_norm());
        assert!(!r.rank_deficient_steps.is_empty());
        assert!(r.q_basis.orthonormality_defect() <= 1e-12);
    }

    #[test]
    fn basic_rejects_bad_sizes() {
        let a = Matrix::identity(6);
        assert!(basic_randomized(&a, 3, 3, RngSeed(0)).is_err());
        assert!(basic_randomized(&a, 0, 3, RngSeed(0)).is_err());
        assert!(basic_randomized(&a, 2, 7, RngSeed(0)).is_err());
    }

    #[test]
    fn exact_invariant_subspace_start() {
        let a = gaussian_matrix(25, 18, RngSeed(12));
        let f = exact_svd(&a).unwrap();
        let omega = f.v.columns(0, 6);
        for q in [0, 2] {
            let cfg = SketchConfig::new(4, 6, q, 0);
            let r = subspace_iteration(&a, &omega, &cfg).unwrap();
            for j in 0..4 {
                assert!((r.sigma_hat[j] - f.sigma[j]).abs() <= 1e-10 * f.sigma[0]);
            }
        }
    }

    #[test]
    fn start_orthogonal_to_leading_vectors_sees_only_tail() {
        let a = diag_decay(20, 0.7);
        let f = exact_svd(&a).unwrap();
        let omega = f.v.columns(4, 10);
        let cfg = SketchConfig::new(4, 6, 0, 0);
        let r = subspace_iteration(&a, &omega, &cfg).unwrap();
        assert!(r.sigma_hat[0] <= f.sigma[4] * (1.0 + 1e-12));
        assert!(r.sigma_hat[3] < 0.5 * f.sigma[3]);
    }

    #[test]
    fn rsi_identity_and_determinism() {
        let a = Matrix::identity(15);
        let cfg = SketchConfig::new(3, 7, 2, 44);
        let r = randomized_subspace_iteration(&a, &cfg).unwrap();
        for s in &r.sigma_hat {
            assert!((s - 1.0).abs() < 1e-12);
        }
        let g = gaussian_matrix(30, 20, RngSeed(13));
        let x = randomized_subspace_iteration(&g, &cfg).unwrap();
        let y = randomized_subspace_iteration(&g, &cfg).unwrap();
        assert_eq!(x, y);
        assert_eq!(x.matvec_count, (2 * 2 + 2) * 7);
    }

    #[test]
    fn power_method_examples() {
        let a = Matrix::from_diag(&[2.0, 1.0]);
        assert_eq!(power_method(&a, &[1.0, 0.0], 3).unwrap().norm_estimate, 2.0);
        for q in 0..5 {
            let e = power_method(&a, &[0.0, 1.0], q).unwrap();
            assert_eq!(e.norm_estimate, 1.0);
            assert_eq!(e.matvec_count, 2 * q + 2);
        }
        assert!(power_method(&a, &[0.0, 0.0], 1).is_err());

        let g = gaussian_matrix(50, 50, RngSeed(14));
        let s1 = two_norm(&g).unwrap();
        let w = GaussianStream::new(RngSeed(15)).vector(50);
        let e = power_method(&g, &w, 20).unwrap();
        assert!(e.norm_estimate <= s1 * (1.0 + 1e-12));
        let trace = power_trace(&g, &w, 2000).unwrap();
        assert!((trace.last().unwrap().norm_estimate - s1).abs() <= 1e-6 * s1);
    }

    #[test]
    fn randomized_power_examples() {
        let a = Matrix::identity(9);
        for s in 0..5 {
            let e = randomized_power_method(&a, 1, RngSeed(s)).unwrap();
            assert!((e.norm_estimate - 1.0).abs() < 1e-14);
        }
        let u: Vec<f64> = (0..7).map(|i| (i as f64).cos()).collect();
        let v: Vec<f64> = (0..5).map(|i| 1.0 + i as f64).collect();
        let a = Matrix::from_fn(7, 5, |i, j| 3.0 * u[i] * v[j]);
        let e = randomized_power_method(&a, 0, RngSeed(1)).unwrap();
        let exact = 3.0 * norm2(&u) * norm2(&v);
        assert!((e.norm_estimate - exact).abs() <= 1e-12 * exact);
    }

    #[test]
    fn randomized_power_gap_point_nine() {
        // sigma_2/sigma_1 = 0.9; (0.9)^{2q+1} <= 1e-3 needs q = 33.
        let n = 100;
        let mut d = vec![0.9; n];
        d[0] = 1.0;
        for (i, x) in d.iter_mut().enumerate().skip(2) {
            *x = 0.9 * 0.99f64.powi(i as i32);
        }
        let a = Matrix::from_diag(&d);
        let q = (0..).find(|&q| 0.9f64.powi(2 * q + 1) <= 1e-3).unwrap() as usize;
        let good = (0..200u64)
            .filter(|&s| randomized_power_method(&a, q, RngSeed(s)).unwrap().norm_estimate >= 0.999)
            .count();
        assert!(good >= 190, "{good}");
    }

    #[test]
    fn small_k_start_is_better_aligned() {
        let n = 60;
        let a = Matrix::from_diag(&(0..n).map(|i| 0.8f64.powi(i)).collect::<Vec<_>>());
        let mut wins = 0;
        for s in 0..200u64 {
            let stage1 = basic_randomized(&a, 1, 5, RngSeed(s)).unwrap();
            let w1 = stage1.v_hat[(0, 0)].abs();
            let mut r = GaussianStream::new(RngSeed(10_000 + s)).vector(n as usize);
            let nr = norm2(&r);
            r.iter_mut().for_each(|x| *x /= nr);
            if w1 > r[0].abs() {
                wins += 1;
            }
        }
        assert!(wins >= 180, "{wins}");
    }

    #[test]
    fn small_k_identity_and_trace_consistency() {
        let a = Matrix::identity(10);
        let r = improved_small_k(&a, 1, 5, 1, 2, RngSeed(3)).unwrap();
        assert!((r.sigma_hat[0] - 1.0).abs() < 1e-14);
        assert_eq!(r.matvec_count, 10 + 6);
        assert!(improved_small_k(&a, 1, 1, 1, 0, RngSeed(0)).is_err());

        let g = gaussian_matrix(20, 16, RngSeed(16));
        let t = small_k_trace(&g, 5, 3, RngSeed(17)).unwrap();
        for (q, step) in t.iter().enumerate() {
            let r = improved_small_k(&g, 1, 5, 1, q, RngSeed(17)).unwrap();
            assert_eq!(r.matvec_count, step.matvec_count);
            assert!((r.sigma_hat[0] - step.norm_estimate).abs() <= 1e-12 * step.norm_estimate);
        }
    }

    #[test]
    fn subspace_trace_matches_direct_runs() {
        let a = gaussian_matrix(30, 24, RngSeed(18));
        let omega = gaussian_matrix(24, 6, RngSeed(19));
        let trace = subspace_trace(&a, &omega, 3).unwrap();
        for step in &trace {
            let r = subspace_iteration(&a, &omega, &SketchConfig::new(6, 6, step.q, 0)).unwrap();
            assert_eq!(r.matvec_count, step.matvec_count);
            for (x, y) in r.sigma_hat.iter().zip(&step.sigma) {
                assert!((x - y).abs() <= 1e-12 * step.sigma[0]);
            }
        }
    }

    #[test]
    fn wide_input_works_without_transposing() {
        let a = gaussian_matrix(8, 20, RngSeed(20));
        let cfg = SketchConfig::new(3, 6, 1, 21);
        let r = randomized_subspace_iteration(&a, &cfg).unwrap();
        assert_eq!(r.q_basis.shape(), (8, 6));
        assert_eq!(r.v_hat.shape(), (20, 3));
        let s = singular_values(&a).unwrap();
        for j in 0..3 {
            assert!(r.sigma_hat[j] <= s[j] + 1e-12);
        }
    }

    #[test]
    fn diagnostics_for_aligned_start() {
        let a = gaussian_matrix(20, 12, RngSeed(22));
        let f = exact_svd(&a).unwrap();
        let omega = f.v.columns(0, 5);
        let d = omega_diagnostics(&f.v, &omega, 0).unwrap();
        assert!(d.omega2_norm < 1e-12);
        assert!((d.omega1_pinv_norm - 1.0).abs() < 1e-12);
        let cfg = SketchConfig::new(2, 5, 0, 0).with_p(1);
        let bad = f.v.columns(5, 10);
        assert!(matches!(
            subspace_iteration_diagnosed(&a, &bad, &cfg, &f.v),
            Err(Error::RowRankDeficient { .. })
        ));
    }

    fn audit_invariants(a: &Matrix, r: &LowRankApprox, oracle: &SvdFactors, seed: u64) {
        let k = r.k();
        let tol = 1e-10 * oracle.sigma[0];
        // Orthonormality and interlacing.
        assert!(r.q_basis.orthonormality_defect() <= 1e-12);
        assert!(r.core_u.orthonormality_defect() <= 1e-12);
        assert!(r.v_hat.orthonormality_defect() <= 1e-12);
        for j in 0..k {
            assert!(r.sigma_hat[j] <= oracle.sigma[j] + 1e-12 * oracle.sigma[0]);
        }
        // Chain ‖A−A_k‖_F ≤ ‖A−QB_k‖_F ≤ ‖A−QQᵀA_k‖_F.
        let err = r.error_fro(a).unwrap();
        let ak = oracle.truncate(k).reconstruct();
        let opt = a.sub(&ak).unwrap().fro_norm();
        let qqt_ak = r
            .q_basis
            .matmul(&r.q_basis.t_matmul(&ak).unwrap())
            .unwrap();
        let upper = a.sub(&qqt_ak).unwrap().fro_norm();
        assert!(opt <= err + tol && err <= upper + tol);
        // Truncation dominance and the Pythagorean identity for random B.
        let qta = r.q_basis.t_matmul(a).unwrap();
        let proj = a.sub(&r.q_basis.matmul(&qta).unwrap()).unwrap();
        let mut g = GaussianStream::new(RngSeed(seed));
        for _ in 0..100 {
            let x = g.matrix(r.q_basis.cols(), k);
            let y = g.matrix(k, a.cols());
            let b_rand = x.matmul(&y).unwrap();
            let approx = r.q_basis.matmul(&b_rand).unwrap();
            let e = a.sub(&approx).unwrap();
            assert!(err <= e.fro_norm() + tol);
            let lhs = e.fro_norm().powi(2);
            let rhs = proj.fro_norm().powi(2) + qta.sub(&b_rand).unwrap().fro_norm().powi(2);
            assert!((lhs - rhs).abs() <= 1e-10 * lhs.max(1e-300));
            assert!(proj.fro_norm() <= e.fro_norm() + tol);
            assert!(two_norm(&proj).unwrap() <= two_norm(&e).unwrap() + tol);
        }
        // Reverse Eckart–Young consistency.
        let tail: f64 = oracle.sigma[k..].iter().map(|s| s * s).sum();
        let eta = (err * err - tail).max(0.0).sqrt();
        let s_next = oracle.sigma.get(k).copied().unwrap_or(0.0);
        assert!(r.error_two(a).unwrap() <= (eta * eta + s_next * s_next).sqrt() + tol);
        let dev: f64 = (0..k)
            .map(|j| (oracle.sigma[j] - r.sigma_hat[j]).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(dev <= eta + tol);
    }

    #[test]
    fn invariants_on_random_runs() {
        for t in 0..6u64 {
            let a = gaussian_matrix(24, 18, RngSeed(100 + t)).matmul(&diag_decay(18, 0.75)).unwrap();
            let oracle = exact_svd(&a).unwrap();
            let cfg = SketchConfig::new(3, 7, (t % 3) as usize, 200 + t);
            let r = randomized_subspace_iteration(&a, &cfg).unwrap();
            audit_invariants(&a, &r, &oracle, 300 + t);
            assert_eq!(r.matvec_count, (2 * cfg.q + 2) * cfg.ell);
        }
    }

    #[test]
    fn interlacing_weyl_hoffman_wielandt() {
        for t in 0..10u64 {
            let a = gaussian_matrix(8, 6, RngSeed(400 + t));
            let b = gaussian_matrix(8, 6, RngSeed(500 + t));
            let sa = singular_values(&a).unwrap();
            let sb = singular_values(&b).unwrap();
            let q = qr_factor(&gaussian_matrix(8, 4, RngSeed(600 + t))).unwrap().q;
            let sq = singular_values(&q.t_matmul(&a).unwrap()).unwrap();
            for j in 0..4 {
                assert!(sq[j] <= sa[j] + 1e-12);
            }
            let sab = singular_values(&a.add(&b).unwrap()).unwrap();
            for i in 1..=6 {
                for j in 1..=6 {
                    if i + j - 1 <= 6 {
                        assert!(sab[i + j - 2] <= sa[i - 1] + sb[j - 1] + 1e-12);
                    }
                }
            }
            let hw: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
            assert!(hw <= a.sub(&b).unwrap().fro_norm() + 1e-12);
        }
    }

    #[test]
    fn truncation_via_k_equal_ell_is_projection() {
        let a = gaussian_matrix(20, 15, RngSeed(30));
        let cfg = SketchConfig::new(5, 5, 0, 31);
        let r = randomized_subspace_iteration(&a, &cfg).unwrap();
        let proj = r.q_basis.matmul(&r.q_basis.t_matmul(&a).unwrap()).unwrap();
        assert!(r.reconstruct().max_abs_diff(&proj) <= 1e-12 * a.max_abs());
        let t = truncated_svd(&a, 5).unwrap();
        assert!(dot(&t.sigma, &t.sigma) >= dot(&r.sigma_hat, &r.sigma_hat) - 1e-10);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn sketch_invariants_hold(seed in 0u64..10_000, q in 0usize..3, k in 1usize..4) {
            let a = gaussian_matrix(16, 12, RngSeed(seed)).matmul(&diag_decay(12, 0.6)).unwrap();
            let oracle = exact_svd(&a).unwrap();
            let cfg = SketchConfig::new(k, k + 3, q, seed ^ 0xabc);
            let r = randomized_subspace_iteration(&a, &cfg).unwrap();
            audit_invariants(&a, &r, &oracle, seed);
            prop_assert_eq!(r.matvec_count, (2 * q + 2) * (k + 3));
        }
    }
}
