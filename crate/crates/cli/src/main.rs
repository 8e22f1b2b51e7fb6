mod experiment;
mod misc;
mod report;
mod sketch;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rsvd-lab", version, about = "Randomized low-rank approximation with checked error bounds")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Low-rank approximation of a matrix file.
    Sketch(sketch::SketchArgs),
    /// Run one of the scaled experiments and write CSV tables plus a JSON report.
    Experiment(experiment::ExperimentArgs),
    /// Evaluate the error bounds on a spectrum.
    Bounds(misc::BoundsArgs),
    /// Estimate the one-norm or two-norm of a matrix file.
    EstimateNorm(misc::EstimateArgs),
    /// Write a test matrix.
    Gen(misc::GenArgs),
}

/// Outcome of a command that ran to completion.
pub enum Outcome {
    Ok,
    /// Finished, but a deterministic bound was violated.
    Violations(usize),
}

pub fn write_or_print(path: Option<&PathBuf>, text: &str) -> anyhow::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display())),
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Sketch(a) => sketch::run(a),
        Cmd::Experiment(a) => experiment::run(a),
        Cmd::Bounds(a) => misc::bounds(a),
        Cmd::EstimateNorm(a) => misc::estimate(a),
        Cmd::Gen(a) => misc::gen(a),
    };
    match res {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::Violations(n)) => {
            eprintln!("rsvd-lab: {n} deterministic bound violation(s)");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("rsvd-lab: {e:#}");
            ExitCode::from(1)
        }
    }
}
