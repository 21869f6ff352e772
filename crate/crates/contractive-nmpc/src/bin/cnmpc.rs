//! Thin command-line front-end over the library's batch commands.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use contractive_nmpc::cli::{self, load_config};

#[derive(Parser)]
#[command(name = "cnmpc", about = "Contraction-based NMPC experiments", version)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop experiment from a JSON config.
    Simulate { config: PathBuf },
    /// Randomized certification of the contraction property.
    Verify {
        config: PathBuf,
        /// States sampled uniformly from the admissible set.
        #[arg(long, default_value_t = 1000)]
        samples: usize,
        /// Seed of the sampler and the per-sample solver substreams;
        /// defaults to the config's solver seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run two configs sharing a model and initial state, and compare.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        /// Where to write the comparison JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-run the diagnostic checker on a stored CSV log.
    Check {
        csv: PathBuf,
        config: PathBuf,
        /// Where to write the per-check JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run() -> Result<i32, contractive_nmpc::Error> {
    match Args::parse().command {
        Command::Simulate { config } => {
            let cfg = load_config(&config)?;
            let out = cli::cmd_simulate(&cfg)?;
            println!(
                "{:?} after {} steps, final |x| = {:.3e}, alpha = {}, diagnostics {}",
                out.summary.terminated_reason,
                out.summary.steps,
                out.summary.final_norm,
                out.summary.resolved.alpha,
                if out.summary.diagnostics_all_pass {
                    "pass"
                } else {
                    "FAIL"
                },
            );
            Ok(out.exit)
        }
        Command::Verify {
            config,
            samples,
            seed,
        } => {
            let cfg = load_config(&config)?;
            let seed = seed.or(cfg.solver.seed).unwrap_or(0);
            let out = cli::cmd_verify(&cfg, samples, seed)?;
            println!(
                "{}/{} states certified, worst ratio {:.6} at {:?}",
                out.summary.successes,
                out.summary.samples,
                out.summary.worst_ratio,
                out.summary.worst_state,
            );
            Ok(out.exit)
        }
        Command::Compare {
            config_a,
            config_b,
            out,
        } => {
            let a = load_config(&config_a)?;
            let b = load_config(&config_b)?;
            let res = cli::cmd_compare(&a, &b, out.as_deref())?;
            println!(
                "A: {:?} in {} steps, mean|x2-x3| = {:?}",
                res.summary.a.terminated_reason, res.summary.a.steps, res.summary.a.mean_gap
            );
            println!(
                "B: {:?} in {} steps, mean|x2-x3| = {:?}",
                res.summary.b.terminated_reason, res.summary.b.steps, res.summary.b.mean_gap
            );
            Ok(res.exit)
        }
        Command::Check { csv, config, out } => {
            let cfg = load_config(&config)?;
            let res = cli::cmd_check(&csv, &cfg, out.as_deref())?;
            for c in &res.summary.report.checks {
                println!(
                    "{:<20} {:>5} applicable, {:>3} failed{}",
                    c.id,
                    c.applicable,
                    c.failed,
                    if c.required { "" } else { " (informational)" },
                );
            }
            if !res.summary.report.alpha_ok {
                println!(
                    "penalty weight {} is below the required {}",
                    res.summary.report.alpha_used, res.summary.report.alpha_required
                );
            }
            println!(
                "overall: {}",
                if res.summary.report.all_pass {
                    "pass"
                } else {
                    "FAIL"
                }
            );
            Ok(res.exit)
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => ExitCode::from(code.clamp(0, 255) as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
