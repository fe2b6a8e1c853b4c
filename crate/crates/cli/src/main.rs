use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use seqais::harness::{run_ablation, run_experiment, run_ground_truth, AblationSuite, EnvKind, EnvSpec, ExperimentConfig};

#[derive(Parser)]
#[command(name = "seqais", version, about = "Rare-event estimation for sequential systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo reference estimate of the failure probability.
    GroundTruth {
        #[arg(long)]
        env: EnvKind,
        #[arg(long, default_value_t = 5_000_000)]
        samples: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Failure threshold override.
        #[arg(long)]
        gamma_fail: Option<f64>,
    },
    /// Runs every trial of an experiment config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs both arms of an ablation on top of a config.
    Ablate {
        #[arg(long)]
        suite: AblationSuite,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::GroundTruth { env, samples, seed, out, gamma_fail } => {
            let mut spec = EnvSpec::new(env);
            spec.gamma_fail = gamma_fail;
            let gt = run_ground_truth(&spec, samples, seed)?;
            gt.write(&out).with_context(|| format!("writing {}", out.display()))?;
            println!(
                "{}: mu = {:e} ± {:e} ({} failures in {} samples, cv {:.3})",
                env.name(),
                gt.mu_hat,
                gt.std_err,
                gt.failures,
                gt.samples,
                gt.cv
            );
            if let Some(mu) = gt.oracle_mu {
                println!("exact mu = {mu:e}");
            }
        }
        Command::Run { config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            log::info!("running {} on {} for {} trials", cfg.method.name(), cfg.env.kind.name(), cfg.trials);
            let output = run_experiment(&cfg)?;
            output.write(&out).with_context(|| format!("writing {}", out.display()))?;
            let r = &output.report;
            println!(
                "{} M={} on {}: eps_abs {:.3} ± {:.3}, eps_rel {:.3} ± {:.3} (mu = {:e}, {:.1}s)",
                r.method,
                cfg.estimator.mixture_size,
                r.env,
                r.eps_abs.mean,
                r.eps_abs.std,
                r.eps_rel.mean,
                r.eps_rel.std,
                r.mu,
                output.wall_clock_s
            );
        }
        Command::Ablate { suite, config, out } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let table = run_ablation(suite, &cfg, Some(&out))?;
            print!("{}", table.to_markdown());
        }
    }
    Ok(())
}
