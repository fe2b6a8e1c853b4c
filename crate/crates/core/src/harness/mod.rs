//! Experiment orchestration: configuration files, ground truth, multi-trial
//! runs, reports and ablations.

mod config;
mod env;
mod report;

pub use config::{parse_pairs, ExperimentConfig};
pub use env::{BuiltEnv, EnvKind, EnvSpec, McCount, CHAIN_GAMMA};
pub use report::{
    curve_rows, iter_rows, write_curve_csv, write_iters_csv, CurveRow, ExperimentReport, IterRow, Moments,
    TrialResult,
};

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;

/// Monte Carlo reference value of the failure probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub env: EnvSpec,
    pub gamma: f64,
    pub samples: u64,
    pub seed: u64,
    pub failures: u64,
    pub mu_hat: f64,
    pub std_err: f64,
    /// Coefficient of variation of the Monte Carlo estimator at this sample size.
    pub cv: f64,
    /// Exact value when the environment is enumerable.
    pub oracle_mu: Option<f64>,
}

impl GroundTruth {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read ground truth {}: {e}", path.display())))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir)?;
        }
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

/// Plain Monte Carlo reference estimate with `samples` nominal rollouts.
pub fn run_ground_truth(env: &EnvSpec, samples: u64, seed: u64) -> Result<GroundTruth> {
    if samples == 0 {
        return Err(Error::InvalidArgument("ground truth needs at least one sample".into()));
    }
    let built = env.build()?;
    let gamma = built.threshold();
    let McCount { failures, .. } = built.count_failures(gamma, samples, seed)?;
    let n = samples as f64;
    let mu = failures as f64 / n;
    let std_err = (mu * (1.0 - mu) / n).sqrt();
    let cv = if mu > 0.0 { ((1.0 - mu) / (n * mu)).sqrt() } else { f64::INFINITY };
    Ok(GroundTruth {
        env: env.clone(),
        gamma,
        samples,
        seed,
        failures,
        mu_hat: mu,
        std_err,
        cv,
        oracle_mu: built.oracle_mu(),
    })
}

/// Reference `μ` for an experiment and a label saying where it came from.
pub fn reference_mu(cfg: &ExperimentConfig) -> Result<(f64, String)> {
    let built = cfg.env.build()?;
    if let Some(path) = &cfg.ground_truth_file {
        let gt = GroundTruth::read(path)?;
        if gt.env.kind != cfg.env.kind || gt.gamma != cfg.estimator.gamma {
            return Err(Error::Config(format!(
                "ground truth {} was computed for {} with γ = {}, experiment uses {} with γ = {}",
                path.display(),
                gt.env.kind.name(),
                gt.gamma,
                cfg.env.kind.name(),
                cfg.estimator.gamma
            )));
        }
        return Ok((gt.mu_hat, format!("ground truth file {}", path.display())));
    }
    match built.oracle_mu() {
        Some(mu) if cfg.estimator.gamma == CHAIN_GAMMA => Ok((mu, "exact enumeration".into())),
        _ => Err(Error::Config(format!("env `{}` needs `ground_truth_file`", cfg.env.kind.name()))),
    }
}

/// Everything produced by one experiment.
#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub report: ExperimentReport,
    pub curve: Vec<CurveRow>,
    pub iters: Vec<IterRow>,
    pub wall_clock_s: f64,
}

/// Runs every trial of `cfg`; trial `i` uses seed `cfg.seed + i`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let start = Instant::now();
    let (mu, mu_source) = reference_mu(cfg)?;
    let built = cfg.env.build()?;
    let seeds: Vec<u64> = (0..cfg.trials as u64).map(|i| cfg.seed + i).collect();
    let estimates = par::map_indexed(cfg.trials, |i| {
        let mut est_cfg = cfg.estimator.clone();
        est_cfg.seed = seeds[i];
        built.estimate(cfg.method, &est_cfg)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let mut curve = Vec::new();
    let mut iters = Vec::new();
    let mut trials = Vec::with_capacity(cfg.trials);
    for (i, est) in estimates.iter().enumerate() {
        curve.extend(curve_rows(i, &est.records, cfg.estimator.gamma, cfg.estimator.n_total));
        iters.extend(iter_rows(i, &est.iterations));
        trials.push(TrialResult::new(i, seeds[i], est, mu));
    }
    let report = ExperimentReport::new(cfg.clone(), mu, mu_source, trials);
    Ok(ExperimentOutput { report, curve, iters, wall_clock_s: start.elapsed().as_secs_f64() })
}

impl ExperimentOutput {
    /// Writes `report.json`, `curve.csv`, `iters.csv` and `timing.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&self.report)? + "\n")?;
        write_curve_csv(&dir.join("curve.csv"), &self.curve)?;
        write_iters_csv(&dir.join("iters.csv"), &self.iters)?;
        let timing = serde_json::json!({ "wall_clock_s": self.wall_clock_s });
        std::fs::write(dir.join("timing.json"), serde_json::to_string_pretty(&timing)? + "\n")?;
        Ok(())
    }
}

/// Paired configurations compared by an ablation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationSuite {
    Pretrain,
    Defensive,
    Baseline,
}

impl std::str::FromStr for AblationSuite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(AblationSuite::Pretrain),
            "defensive" => Ok(AblationSuite::Defensive),
            "baseline" => Ok(AblationSuite::Baseline),
            other => Err(Error::Config(format!("unknown ablation suite `{other}` (expected pretrain, defensive or baseline)"))),
        }
    }
}

impl AblationSuite {
    /// `(label, directory name, config)` for both arms; the
    /// recommended setting comes first.
    pub fn variants(&self, base: &ExperimentConfig) -> Vec<(String, String, ExperimentConfig)> {
        let arm = |label: &str, slug: &str, f: &dyn Fn(&mut ExperimentConfig)| {
            let mut c = base.clone();
            f(&mut c);
            (label.to_string(), slug.to_string(), c)
        };
        match self {
            AblationSuite::Pretrain => vec![
                arm("pretrained", "pretrained", &|c| c.estimator.pretrain = true),
                arm("not pretrained", "not_pretrained", &|c| c.estimator.pretrain = false),
            ],
            AblationSuite::Defensive => vec![
                arm("vanilla", "vanilla", &|c| c.estimator.defensive = false),
                arm("defensive", "defensive", &|c| c.estimator.defensive = true),
            ],
            AblationSuite::Baseline => vec![
                arm("no baseline", "no_baseline", &|c| c.estimator.baseline = false),
                arm("baseline", "baseline", &|c| c.estimator.baseline = true),
            ],
        }
    }
}

/// One arm of an ablation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationArm {
    pub label: String,
    pub eps_abs: Moments,
    pub eps_rel: Moments,
    pub report_dir: PathBuf,
}

/// Result of an ablation: both arms and a rendered table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub suite: AblationSuite,
    pub method: String,
    pub env: String,
    pub arms: Vec<AblationArm>,
}

impl AblationTable {
    /// Markdown table: one row per metric, one column per arm.
    pub fn to_markdown(&self) -> String {
        let mut s = format!("{} on {}\n\n| Metric |", self.method, self.env);
        for a in &self.arms {
            s += &format!(" {} |", a.label);
        }
        s += "\n|---|";
        s += &"---|".repeat(self.arms.len());
        s += "\n| ε_abs |";
        for a in &self.arms {
            s += &format!(" {:.2} ± {:.2} |", a.eps_abs.mean, a.eps_abs.std);
        }
        s += "\n| ε_rel |";
        for a in &self.arms {
            s += &format!(" {:.2} ± {:.2} |", a.eps_rel.mean, a.eps_rel.std);
        }
        s + "\n"
    }
}

/// Runs both arms of `suite` on top of `base`, writing each arm's outputs
/// under `out/<arm>/` plus `ablation.json` and `ablation.md` in `out`.
pub fn run_ablation(suite: AblationSuite, base: &ExperimentConfig, out: Option<&Path>) -> Result<AblationTable> {
    let mut arms = Vec::new();
    for (label, slug, cfg) in suite.variants(base) {
        let output = run_experiment(&cfg)?;
        if let Some(o) = out {
            output.write(&o.join(&slug))?;
        }
        arms.push(AblationArm {
            label,
            eps_abs: output.report.eps_abs,
            eps_rel: output.report.eps_rel,
            report_dir: PathBuf::from(slug),
        });
    }
    let table = AblationTable {
        suite,
        method: format!("{} M={}", base.method.name().to_uppercase(), base.estimator.mixture_size),
        env: base.env.kind.name().to_string(),
        arms,
    };
    if let Some(o) = out {
        std::fs::create_dir_all(o)?;
        std::fs::write(o.join("ablation.json"), serde_json::to_string_pretty(&table)? + "\n")?;
        std::fs::write(o.join("ablation.md"), table.to_markdown())?;
    }
    Ok(table)
}
