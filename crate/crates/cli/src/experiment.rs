use std::path::PathBuf;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use serde::Serialize;
use serde_json::json;

use rsvd_lab::densela::RngSeed;
use rsvd_lab::experiments::{
    deterministic_audit, deviation_mc, hager_adversarial, matvec_table, power_compare, rank_reveal_mc, tail_mc,
};

use crate::report::{num, opt, write_csv, Report};
use crate::Outcome;

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    PowerCompare,
    MatvecTable,
    HagerAdversarial,
    TailMc,
    DeviationMc,
    DeterministicAudit,
    RankReveal,
}

#[derive(Args, Serialize)]
pub struct ExperimentArgs {
    #[arg(value_enum)]
    name: Experiment,
    /// Directory for `report.json` and CSV tables.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    /// Matrix size; each experiment has its own default.
    #[arg(long)]
    n: Option<usize>,
    /// Number of seeds or Monte-Carlo trials.
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Log-kernel cloud offset (power-compare).
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Block scale of the adversarial matrix (hager-adversarial).
    #[arg(long, default_value_t = 1e10)]
    rho: f64,
    /// Target rank (matvec-table).
    #[arg(long, default_value_t = 50)]
    k: usize,
    /// Largest power-step count recorded (power-compare).
    #[arg(long, default_value_t = 400)]
    max_q: usize,
}

pub fn run(args: ExperimentArgs) -> Result<Outcome> {
    let start = Instant::now();
    std::fs::create_dir_all(&args.out_dir).with_context(|| args.out_dir.display().to_string())?;
    let dir = &args.out_dir;
    let seed = RngSeed(args.seed);
    let mut outcome = Outcome::Ok;
    let (results, aggregate) = match args.name {
        Experiment::PowerCompare => {
            let r = power_compare(args.n.unwrap_or(500), args.mu, args.trials.unwrap_or(20), seed, 1e-8, 5, args.max_q)?;
            let mut rows = Vec::new();
            for run in &r.runs {
                for (method, c) in [("small_k", &run.small_k_curve), ("power", &run.power_curve)] {
                    for p in c {
                        rows.push(vec![run.seed.to_string(), method.into(), p.q.to_string(), p.matvecs.to_string(), num(p.rel_error)]);
                    }
                }
            }
            write_csv(dir.join("curves.csv"), &["seed", "method", "iteration", "matvecs", "rel_sigma1_error"], rows)?;
            let agg = json!({
                "median_matvecs_small_k": r.median_small_k,
                "median_matvecs_power": r.median_power,
                "median_steps_small_k": r.median_small_k_steps,
                "median_steps_power": r.median_power_steps,
            });
            (serde_json::to_value(&r)?, agg)
        }
        Experiment::MatvecTable => {
            let t = matvec_table(args.n.unwrap_or(500), args.k, &[1e-6, 1e-8, 1e-10], &[0, 2, 4], seed)?;
            let rows = t.cells.iter().map(|c| {
                vec![c.q.to_string(), num(c.tol), opt(c.ell), opt(c.matvecs), c.passes.to_string()]
            });
            write_csv(dir.join("matvec_table.csv"), &["q", "tol", "ell", "matvecs", "passes"], rows)?;
            (serde_json::to_value(&t)?, json!({}))
        }
        Experiment::HagerAdversarial => {
            let h = hager_adversarial(args.n.unwrap_or(100), args.rho, 5, args.trials.unwrap_or(20), seed)?;
            let rows = h.runs.iter().map(|r| {
                vec![r.seed.to_string(), num(r.true_norm), num(r.plain), num(r.randomized), num(r.plain_ratio), num(r.randomized_ratio)]
            });
            write_csv(
                dir.join("hager.csv"),
                &["seed", "true_norm", "plain", "randomized", "plain_ratio", "randomized_ratio"],
                rows,
            )?;
            let agg = json!({ "max_plain_ratio": h.max_plain_ratio, "min_randomized_ratio": h.min_randomized_ratio });
            (serde_json::to_value(&h)?, agg)
        }
        Experiment::TailMc => {
            let r = tail_mc(20, &[0, 1, 4], &[1.5, 2.0, 4.0], (60, 40), &[1.0, 2.0, 3.0], args.trials.unwrap_or(10_000), seed)?;
            let mut rows = Vec::new();
            for t in &r.tails {
                for row in &t.rows {
                    rows.push(vec!["tail".into(), t.p.to_string(), num(row.t), num(row.bound), num(row.rate), num(row.se), row.ok.to_string()]);
                }
            }
            for row in &r.concentration.rows {
                rows.push(vec!["concentration".into(), String::new(), num(row.u), num(row.bound), num(row.rate), num(row.se), row.ok.to_string()]);
            }
            write_csv(dir.join("tail_mc.csv"), &["table", "p", "t", "bound", "rate", "se", "ok"], rows)?;
            (serde_json::to_value(&r)?, json!({ "all_ok": r.all_ok() }))
        }
        Experiment::DeviationMc => {
            let r = deviation_mc(args.n.unwrap_or(64), 0.7, 4, 12, 4, 1, 0.1, args.trials.unwrap_or(500), seed)?;
            let rows = r.per_claim.iter().map(|c| vec![c.name.clone(), c.violations.to_string()]);
            write_csv(dir.join("deviation.csv"), &["claim", "violations"], rows)?;
            if r.deterministic_failures > 0 {
                outcome = Outcome::Violations(r.deterministic_failures);
            }
            let agg = json!({ "rate": r.rate, "threshold": r.threshold, "ok": r.ok });
            (serde_json::to_value(&r)?, agg)
        }
        Experiment::DeterministicAudit => {
            let r = deterministic_audit(args.n.unwrap_or(64), 4, 12, &[0, 1, 3], &[0, 1, 2, 4], args.trials.unwrap_or(100), seed)?;
            let rows = r.worst_margins.iter().map(|(name, m)| vec![name.clone(), num(*m)]);
            write_csv(dir.join("audit_margins.csv"), &["claim", "worst_margin"], rows)?;
            if !r.failures.is_empty() {
                outcome = Outcome::Violations(r.failures.len());
            }
            (serde_json::to_value(&r)?, json!({ "failures": r.failures.len(), "skipped": r.skipped }))
        }
        Experiment::RankReveal => {
            let r = rank_reveal_mc(args.n.unwrap_or(64), 5, 10, 0, 0.05, args.trials.unwrap_or(200), seed)?;
            if r.deterministic_failures > 0 {
                outcome = Outcome::Violations(r.deterministic_failures);
            }
            (serde_json::to_value(&r)?, json!({ "rate": r.rate, "threshold": r.threshold, "ok": r.ok }))
        }
    };
    let rep = Report::new("experiment", &args, results, aggregate, start)?;
    std::fs::write(dir.join("report.json"), rep.to_string_pretty()?)?;
    println!("{}", serde_json::to_string(&rep.aggregate)?);
    Ok(outcome)
}
