use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use rsvd_lab::bounds::{
    average_bounds, deterministic_bounds, deviation_bounds, oversampling_p, SpectrumView,
};
use rsvd_lab::densela::{gaussian_matrix, io, Matrix, RngSeed};
use rsvd_lab::normest::{hager_one_norm, randomized_hager, DEFAULT_HAGER_ITERS};
use rsvd_lab::sketch::randomized_power_method;
use rsvd_lab::testmat::{
    adversarial_hager, decay_matrix, identical_leading, log_kernel_discs, log_kernel_gaussian, DecaySpec,
};

use crate::report::Report;
use crate::{write_or_print, Outcome};

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decay {
    Exponential,
    PowerLaw,
}

#[derive(Args, Serialize)]
pub struct BoundsArgs {
    /// Singular values, one per line (or any matrix file, read row-major).
    #[arg(long, conflicts_with = "gen")]
    spectrum: Option<PathBuf>,
    /// Generate the spectrum from a decay model instead.
    #[arg(long, value_enum)]
    gen: Option<Decay>,
    /// Decay rate (exponential) or exponent (power-law).
    #[arg(long, default_value_t = 0.5)]
    param: f64,
    /// Length of a generated spectrum.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    ell: usize,
    /// Defaults to the oversampling rule for `delta`, capped at `ell − k`.
    #[arg(long)]
    p: Option<usize>,
    #[arg(long, default_value_t = 0)]
    q: usize,
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
    /// Measured `‖Ω̂₂‖₂`; with `--omega1-pinv`, adds the deterministic bounds.
    #[arg(long, requires = "omega1_pinv")]
    omega2: Option<f64>,
    /// Measured `‖Ω̂₁⁺‖₂`.
    #[arg(long, requires = "omega2")]
    omega1_pinv: Option<f64>,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn bounds(args: BoundsArgs) -> Result<Outcome> {
    let start = Instant::now();
    let sigma = match (&args.spectrum, args.gen) {
        (Some(path), _) => io::load(path).with_context(|| path.display().to_string())?.into_vec(),
        (None, Some(Decay::Exponential)) => DecaySpec::exponential(args.n, args.param).sigma()?,
        (None, Some(Decay::PowerLaw)) => DecaySpec::power_law(args.n, args.param).sigma()?,
        (None, None) => bail!("give --spectrum or --gen"),
    };
    let spec = SpectrumView::square(sigma)?;
    let rule_p = oversampling_p(args.delta)?;
    let p = args.p.unwrap_or(rule_p.min(args.ell.saturating_sub(args.k)));
    let mut results = json!({
        "p": p,
        "p_rule": rule_p,
        "average": average_bounds(&spec, args.k, args.ell, p, args.q)?,
        "deviation": deviation_bounds(&spec, args.k, args.ell, p, args.q, args.delta)?,
    });
    if let (Some(o2), Some(o1)) = (args.omega2, args.omega1_pinv) {
        results["deterministic"] = serde_json::to_value(deterministic_bounds(&spec, args.k, args.ell, p, args.q, o2, o1)?)?;
    }
    let rep = Report::new("bounds", &args, results, json!({}), start)?;
    write_or_print(args.report.as_ref(), &rep.to_string_pretty()?)?;
    Ok(Outcome::Ok)
}

#[derive(Args, Serialize)]
pub struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// One-norm estimate (default).
    #[arg(long, conflicts_with = "two")]
    one: bool,
    /// Two-norm estimate by the randomized power method.
    #[arg(long)]
    two: bool,
    /// Power steps for `--two`.
    #[arg(long, default_value_t = 10)]
    q: usize,
    /// Sketch samples for the randomized one-norm start.
    #[arg(long, default_value_t = 5)]
    ell: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    report: Option<PathBuf>,
}

pub fn estimate(args: EstimateArgs) -> Result<Outcome> {
    let start = Instant::now();
    let a = io::load(&args.input).with_context(|| args.input.display().to_string())?;
    let seed = RngSeed(args.seed);
    let results = if args.two {
        let e = randomized_power_method(&a, args.q, seed)?;
        json!({ "norm": "two", "estimate": e.norm_estimate, "matvec_count": e.matvec_count })
    } else {
        let n = a.cols();
        let plain = hager_one_norm(&a, &vec![1.0 / n as f64; n], DEFAULT_HAGER_ITERS)?;
        let ell = args.ell.min(a.rows().min(n));
        let randomized = if ell >= 2 { Some(randomized_hager(&a, ell, seed, DEFAULT_HAGER_ITERS)?) } else { None };
        let exact = a.one_norm();
        json!({
            "norm": "one",
            "estimate": randomized.as_ref().map_or(plain.value, |r| r.value.max(plain.value)),
            "plain": plain,
            "randomized": randomized,
            "exact": exact,
            "plain_ratio": plain.value / exact,
            "randomized_ratio": randomized.as_ref().map(|r| r.value / exact),
        })
    };
    let rep = Report::new("estimate-norm", &args, results, json!({}), start)?;
    write_or_print(args.report.as_ref(), &rep.to_string_pretty()?)?;
    Ok(Outcome::Ok)
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Identity,
    Gaussian,
    Exponential,
    PowerLaw,
    LogGaussian,
    LogDiscs,
    Adversarial,
    IdenticalLeading,
}

#[derive(Args, Serialize)]
pub struct GenArgs {
    #[arg(value_enum)]
    family: Family,
    #[arg(long)]
    n: usize,
    /// Output path; `.csv` writes text, anything else the binary format.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Decay rate, power-law exponent, or cloud offset `mu`.
    #[arg(long, default_value_t = 0.5)]
    param: f64,
    #[arg(long, default_value_t = 1e10)]
    rho: f64,
    /// Repeated leading singular values minus one (identical-leading).
    #[arg(long, default_value_t = 5)]
    k: usize,
}

pub fn gen(args: GenArgs) -> Result<Outcome> {
    let seed = RngSeed(args.seed);
    let n = args.n;
    let a: Matrix = match args.family {
        Family::Identity => Matrix::identity(n),
        Family::Gaussian => gaussian_matrix(n, n, seed),
        Family::Exponential => decay_matrix(&DecaySpec::exponential(n, args.param), seed)?.matrix,
        Family::PowerLaw => decay_matrix(&DecaySpec::power_law(n, args.param), seed)?.matrix,
        Family::LogGaussian => log_kernel_gaussian(n, args.param, seed)?,
        Family::LogDiscs => log_kernel_discs(n)?,
        Family::Adversarial => adversarial_hager(n, args.rho, seed)?,
        Family::IdenticalLeading => identical_leading(n, args.k)?,
    };
    io::save(&a, &args.out).with_context(|| args.out.display().to_string())?;
    Ok(Outcome::Ok)
}
