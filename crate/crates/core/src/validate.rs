//! Rank-revealing checks, per-run bound audits and Monte-Carlo harnesses for
//! the Gaussian-matrix inequalities behind the probabilistic bounds.
//!
//! Monte-Carlo trial `t` always draws from `seed ⊕ t`, so results do not
//! depend on scheduling. Trials run on a thread pool when the
//! `RSVD_LAB_THREADS` environment variable is above 1.

use std::collections::hash_map::DefaultHasher;
use std::collections::HashMap;
use std::f64::consts::E;
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{
    det_lowrank_upper, det_sv_lower, deviation_bounds, eta_from_error, hmt_bound, reverse_ey,
    SpectrumView,
};
use crate::densela::{exact_svd, singular_values, two_norm, GaussianStream, Matrix, RngSeed, SvdFactors};
use crate::error::{Error, Result};
use crate::sketch::{LowRankApprox, SketchConfig};

/// Relative slack for claims that must hold on every run.
pub const DETERMINISTIC_SLACK: f64 = 1e-10;

pub const THREADS_ENV: &str = "RSVD_LAB_THREADS";

/// Standard error of a Bernoulli(`p`) rate over `trials`.
pub fn binomial_se(p: f64, trials: usize) -> f64 {
    (p * (1.0 - p) / trials as f64).sqrt()
}

/// One-sided acceptance: `rate ≤ p + 3·se(p)`.
pub fn within_binomial(rate: f64, p: f64, trials: usize) -> bool {
    rate <= p + 3.0 * binomial_se(p, trials)
}

fn thread_count() -> usize {
    std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(1)
}

/// `f(0), …, f(trials − 1)` in order, in parallel when configured.
pub fn map_trials<T, F>(trials: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    let threads = thread_count();
    if threads > 1 {
        if let Ok(pool) = rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
            return pool.install(|| (0..trials).into_par_iter().map(&f).collect());
        }
    }
    (0..trials).map(f).collect()
}

/// Oracle SVDs keyed by matrix content.
#[derive(Default)]
pub struct OracleCache {
    entries: Mutex<HashMap<u64, Vec<(Matrix, Arc<SvdFactors>)>>>,
}

fn content_hash(a: &Matrix) -> u64 {
    let mut h = DefaultHasher::new();
    a.shape().hash(&mut h);
    for x in a.as_slice() {
        x.to_bits().hash(&mut h);
    }
    h.finish()
}

impl OracleCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn svd(&self, a: &Matrix) -> Result<Arc<SvdFactors>> {
        let key = content_hash(a);
        if let Some(hit) = self.lookup(key, a) {
            return Ok(hit);
        }
        let f = Arc::new(exact_svd(a)?);
        let mut map = self.entries.lock().expect("cache lock");
        let bucket = map.entry(key).or_default();
        if let Some((_, g)) = bucket.iter().find(|(m, _)| m == a) {
            return Ok(g.clone());
        }
        bucket.push((a.clone(), f.clone()));
        Ok(f)
    }

    pub fn spectrum(&self, a: &Matrix) -> Result<SpectrumView> {
        let f = self.svd(a)?;
        SpectrumView::new(f.sigma.clone(), a.rows(), a.cols())
    }

    fn lookup(&self, key: u64, a: &Matrix) -> Option<Arc<SvdFactors>> {
        let map = self.entries.lock().expect("cache lock");
        map.get(&key)?
            .iter()
            .find(|(m, _)| m == a)
            .map(|(_, f)| f.clone())
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cache lock").values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRevealReport {
    pub passed: bool,
    /// `min_{j ≤ k} σ_j(B)·c₂/σ_j(A)`.
    pub worst_sv_ratio: f64,
    /// `‖A − B‖₂/(c₁σ_{k+1}(A))`.
    pub norm_ratio: f64,
    pub c1: f64,
    pub c2: f64,
}

/// Candidate approximation for [`check_rank_revealing`].
pub enum Candidate<'a> {
    Dense(&'a Matrix),
    LowRank(&'a LowRankApprox),
}

impl<'a> From<&'a Matrix> for Candidate<'a> {
    fn from(m: &'a Matrix) -> Self {
        Candidate::Dense(m)
    }
}

impl<'a> From<&'a LowRankApprox> for Candidate<'a> {
    fn from(a: &'a LowRankApprox) -> Self {
        Candidate::LowRank(a)
    }
}

/// Checks `σ_j(B) ≥ σ_j(A)/c₂` for `j ≤ k` and `‖A − B‖₂ ≤ c₁σ_{k+1}(A)`.
pub fn check_rank_revealing<'a>(
    a: &Matrix,
    spectrum: &SpectrumView,
    b: impl Into<Candidate<'a>>,
    k: usize,
    c1: f64,
    c2: f64,
) -> Result<RankRevealReport> {
    let r = a.rows().min(a.cols());
    if k == 0 || k >= r {
        return Err(Error::InvalidArgument(format!("need 0 < k < {r}, got {k}")));
    }
    if !(c1 >= 1.0 && c2 >= 1.0) {
        return Err(Error::InvalidArgument(format!(
            "constants must be >= 1, got c1={c1}, c2={c2}"
        )));
    }
    let (b_sigma, dense) = match b.into() {
        Candidate::Dense(m) => (singular_values(m)?, m.clone()),
        Candidate::LowRank(l) => (l.sigma_hat.clone(), l.reconstruct()),
    };
    let worst_sv_ratio = (1..=k)
        .filter(|&j| spectrum.s(j) > 0.0)
        .map(|j| b_sigma.get(j - 1).copied().unwrap_or(0.0) * c2 / spectrum.s(j))
        .fold(f64::INFINITY, f64::min);
    let err = two_norm(&a.sub(&dense)?)?;
    let denom = c1 * spectrum.s(k + 1);
    let norm_ratio = if denom > 0.0 {
        err / denom
    } else if err <= 1e-12 * spectrum.s(1).max(f64::MIN_POSITIVE) {
        0.0
    } else {
        f64::INFINITY
    };
    Ok(RankRevealReport {
        passed: worst_sv_ratio >= 1.0 - 1e-10 && norm_ratio <= 1.0 + 1e-10,
        worst_sv_ratio,
        norm_ratio,
        c1,
        c2,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Deterministic,
    Probabilistic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimStatus {
    Pass,
    Fail,
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Claim {
    pub name: String,
    pub kind: ClaimKind,
    pub status: ClaimStatus,
    /// Signed distance to the bound relative to the claim's scale; negative
    /// means the measured value is on the wrong side.
    pub margin: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub k: usize,
    pub ell: usize,
    pub p: usize,
    pub q: usize,
    pub delta: f64,
    pub err_fro: f64,
    pub err_two: f64,
    pub claims: Vec<Claim>,
}

impl AuditReport {
    pub fn claim(&self, name: &str) -> Option<&Claim> {
        self.claims.iter().find(|c| c.name == name)
    }

    pub fn failed(&self, name: &str) -> bool {
        self.claim(name).is_some_and(|c| c.status == ClaimStatus::Fail)
    }

    /// True if any of `names` failed.
    pub fn any_failed(&self, names: &[&str]) -> bool {
        names.iter().any(|n| self.failed(n))
    }

    pub fn deterministic_failures(&self) -> Vec<&Claim> {
        self.claims
            .iter()
            .filter(|c| c.kind == ClaimKind::Deterministic && c.status == ClaimStatus::Fail)
            .collect()
    }
}

pub mod claims {
    pub const DET_SV_LOWER: &str = "det_sv_lower";
    pub const DET_FRO_UPPER: &str = "det_fro_upper";
    pub const DET_TWO_UPPER: &str = "det_two_upper";
    pub const DEV_SV_LOWER: &str = "dev_sv_lower";
    pub const DEV_FRO_UPPER: &str = "dev_fro_upper";
    pub const DEV_TWO_UPPER: &str = "dev_two_upper";
    pub const QFREE_SV_LOWER: &str = "qfree_sv_lower";
    pub const QFREE_TWO_UPPER: &str = "qfree_two_upper";
    pub const HMT_TWO_UPPER: &str = "hmt_two_upper";
    pub const REVERSE_EY_TWO: &str = "reverse_ey_two";
    pub const REVERSE_EY_SV: &str = "reverse_ey_sv";
    pub const HOFFMAN_WIELANDT: &str = "hoffman_wielandt";
    pub const INTERLACING: &str = "interlacing";
    pub const ECKART_YOUNG: &str = "eckart_young";

    pub const DEVIATION: [&str; 3] = [DEV_SV_LOWER, DEV_FRO_UPPER, DEV_TWO_UPPER];
    pub const Q_FREE: [&str; 2] = [QFREE_SV_LOWER, QFREE_TWO_UPPER];
}

struct Builder {
    claims: Vec<Claim>,
}

impl Builder {
    fn push(&mut self, name: &str, kind: ClaimKind, margin: Option<f64>) {
        let status = match margin {
            None => ClaimStatus::Unavailable,
            Some(m) if kind == ClaimKind::Deterministic && m >= -DETERMINISTIC_SLACK => {
                ClaimStatus::Pass
            }
            Some(m) if kind == ClaimKind::Probabilistic && m >= 0.0 => ClaimStatus::Pass,
            Some(_) => ClaimStatus::Fail,
        };
        self.claims.push(Claim {
            name: name.into(),
            kind,
            status,
            margin,
        });
    }
}

fn rel(x: f64, scale: f64) -> f64 {
    if scale > 0.0 {
        x / scale
    } else {
        x
    }
}

/// Evaluates every applicable bound for one sketch of `a` against the oracle
/// spectrum. Deterministic start-matrix bounds need
/// `approx.omega_diagnostics`; without it they are reported unavailable.
pub fn bound_audit(
    a: &Matrix,
    approx: &LowRankApprox,
    cfg: &SketchConfig,
    spectrum: &SpectrumView,
) -> Result<AuditReport> {
    use claims::*;
    let (k, ell, q) = (cfg.k, cfg.ell, cfg.q);
    let p = cfg.p();
    if approx.k() != k {
        return Err(Error::DimensionMismatch(format!(
            "approximation has rank {}, config says k={k}",
            approx.k()
        )));
    }
    let resid = approx.residual(a)?;
    let err_fro = resid.fro_norm();
    let err_two = two_norm(&resid)?;
    let s1 = spectrum.s(1);
    let fro_a = spectrum.sigma().iter().map(|s| s * s).sum::<f64>().sqrt();
    let r = spectrum.sigma().len();
    let sig_hat = |j: usize| approx.sigma_hat.get(j - 1).copied().unwrap_or(0.0);
    let sv_margin = |lower: &[f64]| {
        (1..=k)
            .map(|j| rel(sig_hat(j) - lower[j - 1], s1))
            .fold(f64::INFINITY, f64::min)
    };
    let mut b = Builder { claims: Vec::new() };

    match &approx.omega_diagnostics {
        Some(d) if d.full_row_rank && d.p == p && d.ell == ell => {
            let lower = (1..=k)
                .map(|j| det_sv_lower(spectrum, j, ell, p, q, d.omega2_norm, d.omega1_pinv_norm))
                .collect::<Result<Vec<_>>>()?;
            let up = det_lowrank_upper(spectrum, k, ell, p, q, d.omega2_norm, d.omega1_pinv_norm)?;
            b.push(DET_SV_LOWER, ClaimKind::Deterministic, Some(sv_margin(&lower)));
            b.push(DET_FRO_UPPER, ClaimKind::Deterministic, Some(rel(up.fro - err_fro, fro_a)));
            b.push(DET_TWO_UPPER, ClaimKind::Deterministic, Some(rel(up.two - err_two, s1)));
        }
        _ => {
            for n in [DET_SV_LOWER, DET_FRO_UPPER, DET_TWO_UPPER] {
                b.push(n, ClaimKind::Deterministic, None);
            }
        }
    }

    let dev = deviation_bounds(spectrum, k, ell, p, q, cfg.delta)?;
    b.push(DEV_SV_LOWER, ClaimKind::Probabilistic, Some(sv_margin(&dev.sv_lower)));
    b.push(DEV_FRO_UPPER, ClaimKind::Probabilistic, Some(rel(dev.fro_upper - err_fro, fro_a)));
    b.push(DEV_TWO_UPPER, ClaimKind::Probabilistic, Some(rel(dev.two_upper - err_two, s1)));
    let qf = dev.q_free.as_ref().expect("deviation report carries q-free bounds");
    b.push(QFREE_SV_LOWER, ClaimKind::Probabilistic, Some(sv_margin(&qf.sv_lower)));
    b.push(QFREE_TWO_UPPER, ClaimKind::Probabilistic, Some(rel(qf.two_upper - err_two, s1)));

    if q == 0 && ell >= k + 4 {
        let bound = hmt_bound(spectrum, k, ell - k)?;
        let proj = approx.q_basis.matmul(&approx.q_basis.t_matmul(a)?)?;
        let err = two_norm(&a.sub(&proj)?)?;
        b.push(HMT_TWO_UPPER, ClaimKind::Probabilistic, Some(rel(bound - err, s1)));
    } else {
        b.push(HMT_TWO_UPPER, ClaimKind::Probabilistic, None);
    }

    let eta = eta_from_error(err_fro, spectrum, k);
    let rey = reverse_ey(eta, spectrum, k)?;
    b.push(REVERSE_EY_TWO, ClaimKind::Deterministic, Some(rel(rey.two_upper - err_two, s1)));
    let lead_dev = (1..=k)
        .map(|j| (spectrum.s(j) - sig_hat(j)).powi(2))
        .sum::<f64>()
        .sqrt();
    b.push(REVERSE_EY_SV, ClaimKind::Deterministic, Some(rel(rey.sv_dev_upper - lead_dev, s1)));

    let hw = (1..=r)
        .map(|j| (spectrum.s(j) - sig_hat(j)).powi(2))
        .sum::<f64>()
        .sqrt();
    b.push(HOFFMAN_WIELANDT, ClaimKind::Deterministic, Some(rel(err_fro - hw, fro_a)));
    let inter = (1..=k)
        .map(|j| rel(spectrum.s(j) - sig_hat(j), s1))
        .fold(f64::INFINITY, f64::min);
    b.push(INTERLACING, ClaimKind::Deterministic, Some(inter));
    let opt_fro = spectrum.tail_sq(k).sqrt();
    let opt_two = spectrum.s(k + 1);
    b.push(
        ECKART_YOUNG,
        ClaimKind::Deterministic,
        Some(rel(err_fro - opt_fro, fro_a).min(rel(err_two - opt_two, s1))),
    );

    Ok(AuditReport {
        k,
        ell,
        p,
        q,
        delta: cfg.delta,
        err_fro,
        err_two,
        claims: b.claims,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailRow {
    pub t: f64,
    /// `t^{−(p+1)}`.
    pub bound: f64,
    /// `e·t·√ℓ/(p+1)`.
    pub threshold: f64,
    pub exceed: usize,
    pub rate: f64,
    pub se: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailTable {
    pub ell: usize,
    pub p: usize,
    pub trials: usize,
    pub all_full_rank: bool,
    pub rows: Vec<TailRow>,
}

/// Exceedance of `‖G†‖₂ ≥ e·t·√ℓ/(p+1)` for `(ℓ−p) × ℓ` Gaussian `G` against
/// `t^{−(p+1)}`.
pub fn tail_bound_mc(
    ell: usize,
    p: usize,
    t_grid: &[f64],
    trials: usize,
    seed: RngSeed,
) -> Result<TailTable> {
    if ell < p + 2 || trials < 100 || t_grid.iter().any(|t| !(*t >= 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "need ell - p >= 2, trials >= 100 and t >= 1; got ell={ell}, p={p}, trials={trials}"
        )));
    }
    let rows = ell - p;
    let draws: Vec<Result<(f64, bool)>> = map_trials(trials, |t| {
        let g = GaussianStream::new(seed.derive(t as u64)).matrix(rows, ell);
        let s = singular_values(&g)?;
        let smin = s[rows - 1];
        let full = smin > 1e-13 * s[0];
        Ok((if smin > 0.0 { 1.0 / smin } else { f64::INFINITY }, full))
    });
    let draws = draws.into_iter().collect::<Result<Vec<_>>>()?;
    let all_full_rank = draws.iter().all(|d| d.1);
    let rows = t_grid
        .iter()
        .map(|&t| {
            let threshold = E * t * (ell as f64).sqrt() / (p as f64 + 1.0);
            let bound = t.powi(-(p as i32 + 1));
            let exceed = draws.iter().filter(|d| d.0 >= threshold).count();
            let rate = exceed as f64 / trials as f64;
            TailRow {
                t,
                bound,
                threshold,
                exceed,
                rate,
                se: binomial_se(bound, trials),
                ok: within_binomial(rate, bound, trials),
            }
        })
        .collect();
    Ok(TailTable {
        ell,
        p,
        trials,
        all_full_rank,
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationResult {
    pub mean_norm: f64,
    /// `‖S‖₂‖T‖_F + ‖S‖_F‖T‖₂`.
    pub bound: f64,
    pub std_err: f64,
    pub trials: usize,
}

/// Sample mean of `‖SGT‖₂` over Gaussian `G` of shape `s.cols × t.rows`.
pub fn expectation_mc(s: &Matrix, t: &Matrix, trials: usize, seed: RngSeed) -> Result<ExpectationResult> {
    if trials < 2 {
        return Err(Error::InvalidArgument("need at least 2 trials".into()));
    }
    let (gr, gc) = (s.cols(), t.rows());
    let norms = map_trials(trials, |i| {
        let g = GaussianStream::new(seed.derive(i as u64)).matrix(gr, gc);
        two_norm(&s.matmul(&g)?.matmul(t)?)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let n = trials as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let var = norms.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let bound = two_norm(s)? * t.fro_norm() + s.fro_norm() * two_norm(t)?;
    Ok(ExpectationResult {
        mean_norm: mean,
        bound,
        std_err: (var / n).sqrt(),
        trials,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationRow {
    pub u: f64,
    /// `e^{−u²/2}`.
    pub bound: f64,
    pub exceed: usize,
    pub rate: f64,
    pub se: f64,
    pub ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationTable {
    pub m: usize,
    pub n: usize,
    pub trials: usize,
    pub mean: f64,
    /// `√m + √n`.
    pub mean_bound: f64,
    pub rows: Vec<ConcentrationRow>,
}

/// Exceedance of `‖G‖₂ ≥ mean + u` for `m × n` Gaussian `G` against
/// `e^{−u²/2}`, with the sample mean standing in for the expectation.
pub fn concentration_mc(
    m: usize,
    n: usize,
    trials: usize,
    u_grid: &[f64],
    seed: RngSeed,
) -> Result<ConcentrationTable> {
    if trials < 1000 || m == 0 || n == 0 || u_grid.iter().any(|u| !(*u >= 0.0)) {
        return Err(Error::InvalidArgument(format!(
            "need trials >= 1000, nonempty shape and u >= 0; got {m}x{n}, trials={trials}"
        )));
    }
    let norms = map_trials(trials, |i| {
        two_norm(&GaussianStream::new(seed.derive(i as u64)).matrix(m, n))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mean = norms.iter().sum::<f64>() / trials as f64;
    let rows = u_grid
        .iter()
        .map(|&u| {
            let bound = (-0.5 * u * u).exp();
            let exceed = norms.iter().filter(|&&x| x >= mean + u).count();
            let rate = exceed as f64 / trials as f64;
            ConcentrationRow {
                u,
                bound,
                exceed,
                rate,
                se: binomial_se(bound, trials),
                ok: within_binomial(rate, bound, trials),
            }
        })
        .collect();
    Ok(ConcentrationTable {
        m,
        n,
        trials,
        mean,
        mean_bound: (m as f64).sqrt() + (n as f64).sqrt(),
        rows,
    })
}
