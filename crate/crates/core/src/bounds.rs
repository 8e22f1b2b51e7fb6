//! Closed-form accuracy bounds for randomized subspace iteration.
//!
//! Everything here is arithmetic on a supplied spectrum; nothing computes an
//! SVD. Singular values are indexed from 1 in the function arguments, and any
//! index past the end of the spectrum reads as zero.

use std::f64::consts::E;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumView {
    sigma: Vec<f64>,
    m: usize,
    n: usize,
}

impl SpectrumView {
    pub fn new(sigma: Vec<f64>, m: usize, n: usize) -> Result<Self> {
        if sigma.is_empty() || sigma.len() > m.min(n) {
            return Err(Error::InvalidArgument(format!(
                "spectrum of length {} for a {m}x{n} matrix",
                sigma.len()
            )));
        }
        if let Some(i) = sigma.iter().position(|s| !s.is_finite() || *s < 0.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma[{i}] = {} is not a finite nonnegative value",
                sigma[i]
            )));
        }
        if let Some(i) = sigma.windows(2).position(|w| w[1] > w[0]) {
            return Err(Error::InvalidArgument(format!(
                "spectrum increases at index {}",
                i + 1
            )));
        }
        Ok(Self { sigma, m, n })
    }

    /// Square `n × n` spectrum with `n = sigma.len()`.
    pub fn square(sigma: Vec<f64>) -> Result<Self> {
        let n = sigma.len();
        Self::new(sigma, n, n)
    }

    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// `σ_j`, 1-based; zero past the stored values.
    pub fn s(&self, j: usize) -> f64 {
        assert!(j >= 1, "singular values are 1-indexed");
        self.sigma.get(j - 1).copied().unwrap_or(0.0)
    }

    /// `Σ_{j>k} σ_j²`.
    pub fn tail_sq(&self, k: usize) -> f64 {
        self.sigma.iter().skip(k).map(|s| s * s).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Deterministic,
    Average,
    Deviation,
    Hmt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PBranch {
    #[serde(rename = "p>=2")]
    TwoOrMore,
    #[serde(rename = "p=1")]
    One,
    #[serde(rename = "p=0")]
    Zero,
}

impl PBranch {
    pub fn of(p: usize) -> Self {
        match p {
            0 => PBranch::Zero,
            1 => PBranch::One,
            _ => PBranch::TwoOrMore,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    pub c1: f64,
    pub c2: f64,
    pub c: f64,
    pub c_delta: Option<f64>,
    /// `τ_j = σ_{ℓ−p+1}/σ_j` for `j = 1..=k`.
    pub tau: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormPair {
    pub fro: f64,
    pub two: f64,
}

/// The q-free pair: `σ_j/√(1+C_Δ²)` and `σ_{k+1}√(1+kC_Δ²)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QFreeBounds {
    pub sv_lower: Vec<f64>,
    pub two_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub regime: Regime,
    pub p_branch: PBranch,
    pub k: usize,
    pub ell: usize,
    pub p: usize,
    pub q: usize,
    /// Lower bounds on `σ_j(QB_k)`, `j = 1..=k`.
    pub sv_lower: Vec<f64>,
    pub fro_upper: f64,
    pub two_upper: f64,
    pub constants: Constants,
    pub q_free: Option<QFreeBounds>,
}

fn check_unit_interval(delta: f64) -> Result<()> {
    if delta > 0.0 && delta < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "delta must lie in (0, 1), got {delta}"
        )))
    }
}

fn check_shape(spec: &SpectrumView, k: usize, ell: usize, p: usize) -> Result<()> {
    if k == 0 || k + p > ell || ell > spec.n() {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= k <= ell - p and ell <= n; got k={k}, ell={ell}, p={p}, n={}",
            spec.n()
        )));
    }
    Ok(())
}

/// `max(0, ⌈log₁₀(2/Δ)⌉ − 1)`.
pub fn oversampling_p(delta: f64) -> Result<usize> {
    check_unit_interval(delta)?;
    Ok(((2.0 / delta).log10().ceil() - 1.0).max(0.0) as usize)
}

/// `min(ell − k, oversampling_p(delta))`.
pub fn default_p(k: usize, ell: usize, delta: f64) -> Result<usize> {
    Ok(oversampling_p(delta)?.min(ell.saturating_sub(k)))
}

/// Classical bound for one-pass sketching with `ell = k + p`, `p ≥ 4`.
pub fn hmt_bound(spec: &SpectrumView, k: usize, p: usize) -> Result<f64> {
    if p < 4 {
        return Err(Error::InvalidArgument(format!("needs p >= 4, got {p}")));
    }
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let (kf, pf) = (k as f64, p as f64);
    Ok((1.0 + 17.0 * (1.0 + kf / pf).sqrt()) * spec.s(k + 1)
        + 8.0 * (kf + pf).sqrt() / (pf + 1.0) * spec.tail_sq(k).sqrt())
}

/// `σ_j/√(1 + w²(σ_{ℓ−p+1}/σ_j)^{4q+2})` with `w = ‖Ω̂₂‖₂‖Ω̂₁†‖₂`.
pub fn det_sv_lower(
    spec: &SpectrumView,
    j: usize,
    ell: usize,
    p: usize,
    q: usize,
    omega2_norm: f64,
    omega1_pinv_norm: f64,
) -> Result<f64> {
    if j == 0 || j + p > ell {
        return Err(Error::InvalidArgument(format!(
            "need 1 <= j <= ell - p; got j={j}, ell={ell}, p={p}"
        )));
    }
    let sj = spec.s(j);
    let s = spec.s(ell - p + 1);
    if sj == 0.0 {
        return Ok(0.0);
    }
    let w = omega2_norm * omega1_pinv_norm;
    if s == 0.0 || w == 0.0 {
        return Ok(sj);
    }
    let x = w * w * (s / sj).powi(4 * q as i32 + 2);
    Ok(sj / (1.0 + x).sqrt())
}

fn alpha_gamma(spec: &SpectrumView, k: usize, ell: usize, p: usize, q: usize) -> (f64, f64) {
    let s = spec.s(ell - p + 1);
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let r = (s / spec.s(k)).powi(2 * q as i32);
    ((k as f64).sqrt() * s * r, s / spec.s(1) * r)
}

/// `α²w²/(1+γ²w²)`, with the `w → ∞` limit `α²/γ²`.
fn det_extra(alpha: f64, gamma: f64, w: f64) -> f64 {
    if alpha == 0.0 || w == 0.0 {
        0.0
    } else if w.is_infinite() {
        if gamma > 0.0 {
            (alpha / gamma).powi(2)
        } else {
            f64::INFINITY
        }
    } else {
        let aw = alpha * w;
        let gw = gamma * w;
        aw * aw / (1.0 + gw * gw)
    }
}

/// Frobenius and spectral upper bounds on `‖A − QB_k‖` from the start-matrix
/// quality `w = ‖Ω̂₂‖₂‖Ω̂₁†‖₂`.
pub fn det_lowrank_upper(
    spec: &SpectrumView,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
    omega2_norm: f64,
    omega1_pinv_norm: f64,
) -> Result<NormPair> {
    check_shape(spec, k, ell, p)?;
    let (alpha, gamma) = alpha_gamma(spec, k, ell, p, q);
    let extra = det_extra(alpha, gamma, omega2_norm * omega1_pinv_norm);
    Ok(NormPair {
        fro: (spec.tail_sq(k) + extra).sqrt(),
        two: (spec.s(k + 1).powi(2) + extra).sqrt(),
    })
}

/// The looser form without the `1 + γ²w²` denominator. Only safe to combine
/// with average-case estimates of `w` when `p ≥ 2`.
pub fn det_lowrank_upper_simplified(
    spec: &SpectrumView,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
    omega2_norm: f64,
    omega1_pinv_norm: f64,
) -> Result<NormPair> {
    check_shape(spec, k, ell, p)?;
    let (alpha, _) = alpha_gamma(spec, k, ell, p, q);
    let w = omega2_norm * omega1_pinv_norm;
    let extra = if alpha == 0.0 { 0.0 } else { (alpha * w).powi(2) };
    Ok(NormPair {
        fro: (spec.tail_sq(k) + extra).sqrt(),
        two: (spec.s(k + 1).powi(2) + extra).sqrt(),
    })
}

/// Per-`j` lower bounds and norm upper bounds for one measured start matrix.
pub fn deterministic_bounds(
    spec: &SpectrumView,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
    omega2_norm: f64,
    omega1_pinv_norm: f64,
) -> Result<BoundReport> {
    let pair = det_lowrank_upper(spec, k, ell, p, q, omega2_norm, omega1_pinv_norm)?;
    let sv_lower = (1..=k)
        .map(|j| det_sv_lower(spec, j, ell, p, q, omega2_norm, omega1_pinv_norm))
        .collect::<Result<Vec<_>>>()?;
    let (c1, c2, c) = average_constants(spec.n(), ell, p);
    Ok(BoundReport {
        regime: Regime::Deterministic,
        p_branch: PBranch::of(p),
        k,
        ell,
        p,
        q,
        sv_lower,
        fro_upper: pair.fro,
        two_upper: pair.two,
        constants: Constants {
            c1,
            c2,
            c,
            c_delta: None,
            tau: taus(spec, k, ell, p),
        },
        q_free: None,
    })
}

/// `(C₁, C₂, C)` with `C₁ = √(n−ℓ+p) + √ℓ + 7`, `C₂ = 4e√ℓ/(p+1)`.
pub fn average_constants(n: usize, ell: usize, p: usize) -> (f64, f64, f64) {
    let c1 = ((n + p - ell) as f64).sqrt() + (ell as f64).sqrt() + 7.0;
    let c2 = 4.0 * E * (ell as f64).sqrt() / (p as f64 + 1.0);
    (c1, c2, c1 * c2)
}

fn taus(spec: &SpectrumView, k: usize, ell: usize, p: usize) -> Vec<f64> {
    let s = spec.s(ell - p + 1);
    (1..=k)
        .map(|j| {
            let sj = spec.s(j);
            if s == 0.0 {
                0.0
            } else {
                s / sj
            }
        })
        .collect()
}

/// Expected-value lower bound on `σ_j(QB_k)`, branch chosen by `p`.
pub fn avg_sv_lower(
    spec: &SpectrumView,
    j: usize,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
) -> Result<f64> {
    check_shape(spec, k, ell, p)?;
    if j == 0 || j > k {
        return Err(Error::InvalidArgument(format!("need 1 <= j <= k, got j={j}")));
    }
    let sj = spec.s(j);
    if sj == 0.0 {
        return Ok(0.0);
    }
    let s = spec.s(ell - p + 1);
    if s == 0.0 {
        return Ok(sj);
    }
    let tau = s / sj;
    let (_, _, c) = average_constants(spec.n(), ell, p);
    Ok(match PBranch::of(p) {
        PBranch::TwoOrMore => sj / (1.0 + c * c * tau.powi(4 * q as i32 + 2)).sqrt(),
        PBranch::One => {
            let x = tau.powi(4 * q as i32 + 2);
            if x == 0.0 {
                sj
            } else {
                // log √(C² + 1/x) = ½(−log x + log(1 + C²x)).
                let log_term = 0.5 * ((c * c * x).ln_1p() - x.ln());
                sj / (1.0 + c * c * x * log_term)
            }
        }
        PBranch::Zero => sj / (1.0 + c * tau.powi(2 * q as i32 + 1)),
    })
}

/// Expected-value upper bounds on `‖A − QB_k‖_F` and `‖A − QB_k‖₂`.
pub fn avg_lowrank_upper(
    spec: &SpectrumView,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
) -> Result<NormPair> {
    check_shape(spec, k, ell, p)?;
    let delta_hat = spec.tail_sq(k).sqrt();
    let next = spec.s(k + 1);
    let s = spec.s(ell - p + 1);
    if s == 0.0 {
        return Ok(NormPair {
            fro: delta_hat,
            two: next,
        });
    }
    let tau_k = s / spec.s(k);
    let (_, _, c) = average_constants(spec.n(), ell, p);
    let kf = k as f64;
    let x = kf * c * c * s * s * tau_k.powi(4 * q as i32);
    Ok(match PBranch::of(p) {
        PBranch::TwoOrMore => NormPair {
            fro: (delta_hat * delta_hat + x).sqrt(),
            two: (next * next + x).sqrt(),
        },
        PBranch::One => {
            // (x/d)·log √(C² + (1/k)(d/s)²τ_k^{−4q}) = (x/d)·½(log C² + log(1 + d²/x)).
            let branch = |d: f64| {
                if x == 0.0 || d == 0.0 {
                    d
                } else {
                    d + x / d * 0.5 * ((c * c).ln() + (d * d / x).ln_1p())
                }
            };
            NormPair {
                fro: branch(delta_hat),
                two: branch(next),
            }
        }
        PBranch::Zero => {
            let s1 = spec.s(1);
            let scale = c * s * tau_k.powi(2 * q as i32);
            let branch = |d: f64, root: f64| {
                if d == 0.0 || scale == 0.0 {
                    d
                } else {
                    d + root * scale * (kf * (s1 / d).powi(2)).ln_1p()
                }
            };
            NormPair {
                fro: branch(delta_hat, (spec.n() as f64).sqrt()),
                two: branch(next, (kf + 1.0).sqrt()),
            }
        }
    })
}

/// Average-case report: per-`j` lower bounds and both norm upper bounds.
pub fn average_bounds(
    spec: &SpectrumView,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
) -> Result<BoundReport> {
    let pair = avg_lowrank_upper(spec, k, ell, p, q)?;
    let sv_lower = (1..=k)
        .map(|j| avg_sv_lower(spec, j, k, ell, p, q))
        .collect::<Result<Vec<_>>>()?;
    let (c1, c2, c) = average_constants(spec.n(), ell, p);
    Ok(BoundReport {
        regime: Regime::Average,
        p_branch: PBranch::of(p),
        k,
        ell,
        p,
        q,
        sv_lower,
        fro_upper: pair.fro,
        two_upper: pair.two,
        constants: Constants {
            c1,
            c2,
            c,
            c_delta: None,
            tau: taus(spec, k, ell, p),
        },
        q_free: None,
    })
}

/// `C_Δ = (e√ℓ/(p+1))(2/Δ)^{1/(p+1)}(√(n−ℓ+p) + √ℓ + √(2 log(2/Δ)))`.
pub fn deviation_constant(n: usize, ell: usize, p: usize, delta: f64) -> Result<f64> {
    check_unit_interval(delta)?;
    if p > ell || n + p < ell {
        return Err(Error::InvalidArgument(format!(
            "need p <= ell <= n + p; got n={n}, ell={ell}, p={p}"
        )));
    }
    let (l, pf) = (ell as f64, p as f64);
    let log2d = (2.0 / delta).ln();
    Ok(E * l.sqrt() / (pf + 1.0)
        * (log2d / (pf + 1.0)).exp()
        * (((n + p - ell) as f64).sqrt() + l.sqrt() + (2.0 * log2d).sqrt()))
}

/// Bounds holding except with probability `delta`, plus the q-free pair.
pub fn deviation_bounds(
    spec: &SpectrumView,
    k: usize,
    ell: usize,
    p: usize,
    q: usize,
    delta: f64,
) -> Result<BoundReport> {
    check_shape(spec, k, ell, p)?;
    let cd = deviation_constant(spec.n(), ell, p, delta)?;
    let s = spec.s(ell - p + 1);
    let sv_lower: Vec<f64> = (1..=k)
        .map(|j| {
            let sj = spec.s(j);
            if sj == 0.0 {
                0.0
            } else if s == 0.0 {
                sj
            } else {
                sj / (1.0 + cd * cd * (s / sj).powi(4 * q as i32 + 2)).sqrt()
            }
        })
        .collect();
    let extra = if s == 0.0 {
        0.0
    } else {
        k as f64 * cd * cd * s * s * (s / spec.s(k)).powi(4 * q as i32)
    };
    let floor = (1.0 + cd * cd).sqrt();
    let q_free = QFreeBounds {
        sv_lower: (1..=k).map(|j| spec.s(j) / floor).collect(),
        two_upper: spec.s(k + 1) * (1.0 + k as f64 * cd * cd).sqrt(),
    };
    let (c1, c2, c) = average_constants(spec.n(), ell, p);
    Ok(BoundReport {
        regime: Regime::Deviation,
        p_branch: PBranch::of(p),
        k,
        ell,
        p,
        q,
        sv_lower,
        fro_upper: (spec.tail_sq(k) + extra).sqrt(),
        two_upper: (spec.s(k + 1).powi(2) + extra).sqrt(),
        constants: Constants {
            c1,
            c2,
            c,
            c_delta: Some(cd),
            tau: taus(spec, k, ell, p),
        },
        q_free: Some(q_free),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReverseEy {
    pub two_upper: f64,
    pub sv_dev_upper: f64,
    /// `σ_{k+1} + η`.
    pub two_upper_simple: f64,
}

/// Turns a Frobenius excess `η² = ‖A−B‖_F² − Σ_{j>k}σ_j²` into a spectral
/// error bound and a bound on the singular-value deviation of `B`.
pub fn reverse_ey(eta: f64, spec: &SpectrumView, k: usize) -> Result<ReverseEy> {
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(Error::InvalidArgument(format!("eta must be >= 0, got {eta}")));
    }
    let next = spec.s(k + 1);
    Ok(ReverseEy {
        two_upper: eta.hypot(next),
        sv_dev_upper: eta,
        two_upper_simple: next + eta,
    })
}

/// `η = √max(0, err_fro² − Σ_{j>k}σ_j²)`.
pub fn eta_from_error(err_fro: f64, spec: &SpectrumView, k: usize) -> f64 {
    (err_fro * err_fro - spec.tail_sq(k)).max(0.0).sqrt()
}

/// `Ĉ_Δ = (e/√ℓ)(2/Δ)^{1/ℓ}(√n + √ℓ + √(2 log(2/Δ)))`.
pub fn hager_constant(n: usize, ell: usize, delta: f64) -> Result<f64> {
    check_unit_interval(delta)?;
    if ell < 2 {
        return Err(Error::InvalidArgument(format!("needs ell >= 2, got {ell}")));
    }
    let l = ell as f64;
    let log2d = (2.0 / delta).ln();
    Ok(E / l.sqrt()
        * (log2d / l).exp()
        * ((n as f64).sqrt() + l.sqrt() + (2.0 * log2d).sqrt()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HagerRule {
    pub ell: usize,
    pub c_hat: f64,
    /// `2e(√(n/ℓ) + 3)`.
    pub limit: f64,
    pub holds: bool,
    /// Guaranteed fraction of `‖A‖₁`: `1/(√n·√(1+Ĉ_Δ²))`.
    pub floor_fraction: f64,
}

/// Sample count `ℓ = ⌈log₂(2/Δ)⌉` for the randomized Hager start, with the
/// resulting constant and its closed-form ceiling.
pub fn hager_rule(n: usize, delta: f64) -> Result<HagerRule> {
    check_unit_interval(delta)?;
    let ell = ((2.0 / delta).log2().ceil() as usize).max(2);
    let c_hat = hager_constant(n, ell, delta)?;
    let limit = 2.0 * E * ((n as f64 / ell as f64).sqrt() + 3.0);
    Ok(HagerRule {
        ell,
        c_hat,
        limit,
        holds: c_hat < limit,
        floor_fraction: 1.0 / ((n as f64).sqrt() * (1.0 + c_hat * c_hat).sqrt()),
    })
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    const ZERO: f64 = 1e-12;
    if flo.abs() <= ZERO {
        return Ok(lo);
    }
    if fhi.abs() <= ZERO {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() || !flo.is_finite() || !fhi.is_finite() {
        return Err(Error::BracketSign {
            lo,
            hi,
            g_lo: flo,
            g_hi: fhi,
        });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// The root of `1 + 1/η = log η`, about 3.5911.
pub fn eta_constant() -> f64 {
    bisect(|x| x.ln() - 1.0 - 1.0 / x, 2.0, 5.0, 1e-14).expect("bracket is valid")
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalEll {
    pub ell_opt: f64,
    pub ell_int: usize,
    /// Bracket on `ℓ` searched: `ek + p − 1` and `η(p−1+k) + p − 1`.
    pub ell_lo: f64,
    pub ell_hi: f64,
    /// Error-factor decay per matvec at `ℓ_opt` under `σ_s/σ_k ≤ (k/s)^T`:
    /// `exp(−T/(ℓ_opt − p + 1))`.
    pub rate_per_matvec: f64,
}

/// Sample count minimizing `(k/(ℓ−p+1))^{1/ℓ}`: the root of
/// `g(ℓ) = ℓ/(ℓ−p+1) + log(k/(ℓ−p+1))` by bisection on
/// `ek ≤ ℓ−p+1 ≤ η(p−1+k)`.
pub fn optimal_ell(k: usize, p: usize, t_model: f64) -> Result<OptimalEll> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if !(t_model > 0.0 && t_model.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "decay exponent must be positive, got {t_model}"
        )));
    }
    let (kf, pf) = (k as f64, p as f64);
    let eta = eta_constant();
    let lo = E * kf + pf - 1.0;
    let hi = eta * (pf - 1.0 + kf) + pf - 1.0;
    let g = |l: f64| {
        let s = l - pf + 1.0;
        l / s + (kf / s).ln()
    };
    let ell_opt = bisect(g, lo, hi, 1e-10)?;
    Ok(OptimalEll {
        ell_opt,
        ell_int: ell_opt.ceil() as usize,
        ell_lo: lo,
        ell_hi: hi,
        rate_per_matvec: (-t_model / (ell_opt - pf + 1.0)).exp(),
    })
}
