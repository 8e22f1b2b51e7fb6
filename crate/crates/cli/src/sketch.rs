use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use rsvd_lab::adaptive::{adaptive_rsi, AdaptiveConfig, AdaptiveTrace};
use rsvd_lab::bounds::SpectrumView;
use rsvd_lab::densela::{exact_svd, gaussian_matrix, io, singular_values, Matrix, RngSeed};
use rsvd_lab::experiments::leading_sv_error;
use rsvd_lab::sketch::{basic_randomized, improved_small_k, subspace_iteration, subspace_iteration_diagnosed, LowRankApprox, SketchConfig};
use rsvd_lab::validate::{bound_audit, AuditReport};

use crate::report::{num, write_csv, Report};
use crate::{write_or_print, Outcome};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algo {
    Basic,
    Rsi,
    SmallK,
    Adaptive,
}

#[derive(Args, Serialize)]
pub struct SketchArgs {
    /// Matrix file (CSV or binary).
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long, value_enum, default_value = "rsi")]
    algo: Algo,
    #[arg(long)]
    k: usize,
    /// Sample count; defaults to `k + 5` capped by the matrix size.
    #[arg(long)]
    ell: Option<usize>,
    #[arg(long, default_value_t = 1)]
    q: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Oversampling used by the bounds; defaults to the rule for `delta`.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// First-stage sample count for `small-k`.
    #[arg(long, default_value_t = 5)]
    ell1: usize,
    /// Accuracy target for `adaptive`.
    #[arg(long, default_value_t = 1e-6)]
    tau: f64,
    /// Sample ceiling for `adaptive`; defaults to the smaller dimension.
    #[arg(long)]
    cmax: Option<usize>,
    /// Check every error bound against the exact spectrum.
    #[arg(long)]
    audit: bool,
    /// Prefix for factor files `<out>.u.bin`, `<out>.sigma.bin`, `<out>.v.bin`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report path (stdout when omitted).
    #[arg(long)]
    report: Option<PathBuf>,
    /// CSV of errors for every power-step count `0..=q` (rsi only).
    #[arg(long)]
    curve: Option<PathBuf>,
}

#[derive(Serialize)]
struct SketchResult {
    sigma_hat: Vec<f64>,
    matvec_count: usize,
    ell: usize,
    err_two: Option<f64>,
    err_fro: f64,
    sv_rel_error: Option<f64>,
    audit: Option<AuditReport>,
    adaptive: Option<AdaptiveTrace>,
    rank_deficient_steps: Vec<usize>,
}

fn err_two(a: &Matrix, ap: &LowRankApprox) -> Result<f64> {
    Ok(singular_values(&a.sub(&ap.reconstruct())?)?.first().copied().unwrap_or(0.0))
}

pub fn run(args: SketchArgs) -> Result<Outcome> {
    let start = Instant::now();
    let a = io::load(&args.input).with_context(|| args.input.display().to_string())?;
    let (m, n) = a.shape();
    let r = m.min(n);
    if args.k == 0 || args.k > r {
        bail!("k must lie in 1..={r}");
    }
    let ell = args.ell.unwrap_or((args.k + 5).min(r));
    let seed = RngSeed(args.seed);
    let mut cfg = SketchConfig::new(args.k, ell, args.q, seed).with_delta(args.delta);
    if let Some(p) = args.p {
        cfg = cfg.with_p(p);
    }
    let oracle = if args.audit || args.curve.is_some() { Some(exact_svd(&a)?) } else { None };

    let mut trace = None;
    let ap = match args.algo {
        Algo::Basic => {
            cfg.q = 0;
            basic_randomized(&a, args.k, ell, seed)?
        }
        Algo::Rsi => {
            cfg.validate(m, n)?;
            let omega = gaussian_matrix(n, ell, seed);
            match &oracle {
                Some(o) => subspace_iteration_diagnosed(&a, &omega, &cfg, &o.v)
                    .or_else(|_| subspace_iteration(&a, &omega, &cfg))?,
                None => subspace_iteration(&a, &omega, &cfg)?,
            }
        }
        Algo::SmallK => {
            cfg.ell = ell;
            improved_small_k(&a, args.k, args.ell1, ell, args.q, seed)?
        }
        Algo::Adaptive => {
            let mut acfg = AdaptiveConfig::new(args.k, args.q, args.tau, args.cmax.unwrap_or(r), seed);
            acfg.delta = args.delta;
            let res = adaptive_rsi(&a, &acfg)?;
            cfg.ell = res.trace.final_ell();
            cfg = cfg.with_p(res.trace.p);
            trace = Some(res.trace);
            res.approx
        }
    };

    let audit = match (&oracle, args.audit) {
        (Some(o), true) => Some(bound_audit(&a, &ap, &cfg, &SpectrumView::new(o.sigma.clone(), m, n)?)?),
        _ => None,
    };
    let violations = audit.as_ref().map_or(0, |r| r.deterministic_failures().len());

    if let (Some(path), Some(o)) = (&args.curve, &oracle) {
        if !matches!(args.algo, Algo::Rsi) {
            bail!("--curve is only available for --algo rsi");
        }
        write_curve(path, &a, &cfg, &o.sigma)?;
    }
    if let Some(prefix) = &args.out {
        let with = |ext: &str| {
            let mut s = prefix.clone().into_os_string();
            s.push(ext);
            PathBuf::from(s)
        };
        io::save(&ap.left_vectors(), with(".u.bin"))?;
        io::save(&Matrix::from_columns(&[ap.sigma_hat.clone()]), with(".sigma.bin"))?;
        io::save(&ap.v_hat, with(".v.bin"))?;
    }

    let res = SketchResult {
        sigma_hat: ap.sigma_hat.clone(),
        matvec_count: ap.matvec_count,
        ell: cfg.ell,
        err_two: Some(err_two(&a, &ap)?),
        err_fro: a.sub(&ap.reconstruct())?.fro_norm(),
        sv_rel_error: oracle.as_ref().map(|o| leading_sv_error(&ap.sigma_hat, &o.sigma, args.k)),
        audit,
        adaptive: trace,
        rank_deficient_steps: ap.rank_deficient_steps.clone(),
    };
    let agg = json!({ "deterministic_violations": violations });
    let rep = Report::new("sketch", &args, &res, agg, start)?;
    write_or_print(args.report.as_ref(), &rep.to_string_pretty()?)?;
    Ok(if violations > 0 { Outcome::Violations(violations) } else { Outcome::Ok })
}

fn write_curve(path: &PathBuf, a: &Matrix, cfg: &SketchConfig, sigma: &[f64]) -> Result<()> {
    let omega = gaussian_matrix(a.cols(), cfg.ell, cfg.seed);
    let fro = a.fro_norm();
    let mut rows = Vec::new();
    for q in 0..=cfg.q {
        let c = SketchConfig { q, ..cfg.clone() };
        let ap = subspace_iteration(a, &omega, &c)?;
        let diff = a.sub(&ap.reconstruct())?;
        let mut row = vec![
            q.to_string(),
            ap.matvec_count.to_string(),
            num(err_two(a, &ap)? / sigma[0]),
            num(diff.fro_norm() / fro),
        ];
        row.extend((0..cfg.k).map(|j| num((ap.sigma_hat[j] - sigma[j]).abs() / sigma[j])));
        rows.push(row);
    }
    let mut header = vec!["q".to_string(), "matvecs".into(), "rel_two_error".into(), "rel_fro_error".into()];
    header.extend((1..=cfg.k).map(|j| format!("sv_rel_error_{j}")));
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    write_csv(path, &header, rows)
}
