use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::ExperimentConfig;
use crate::error::Result;
use crate::estimators::{Estimate, IterationDiag, RunningEstimate};
use crate::mdp::SampleRecord;

/// Mean and sample standard deviation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

impl Moments {
    pub fn of(v: &[f64]) -> Self {
        Self { mean: crate::math::mean(v), std: if v.len() > 1 { crate::math::std_dev(v) } else { 0.0 } }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub mu_hat: f64,
    pub std_err: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub samples: usize,
    pub member_mean_actions: Vec<f64>,
    pub warnings: Vec<String>,
}

impl TrialResult {
    pub fn new(trial: usize, seed: u64, est: &Estimate, mu: f64) -> Self {
        Self {
            trial,
            seed,
            mu_hat: est.mu_hat,
            std_err: est.std_err,
            eps_abs: (est.mu_hat - mu).abs() / mu,
            eps_rel: (est.mu_hat - mu) / mu,
            samples: est.records.len(),
            member_mean_actions: est.member_mean_actions.clone(),
            warnings: est.warnings.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub method: String,
    pub env: String,
    /// Reference failure probability used for the error metrics.
    pub mu: f64,
    pub mu_source: String,
    pub trials: Vec<TrialResult>,
    pub mu_hat: Moments,
    pub eps_abs: Moments,
    pub eps_rel: Moments,
    pub seeds: Vec<u64>,
    pub config: ExperimentConfig,
}

impl ExperimentReport {
    pub fn new(config: ExperimentConfig, mu: f64, mu_source: String, trials: Vec<TrialResult>) -> Self {
        let col = |f: fn(&TrialResult) -> f64| trials.iter().map(f).collect::<Vec<_>>();
        Self {
            method: config.method.name().into(),
            env: config.env.kind.name().into(),
            mu,
            mu_source,
            mu_hat: Moments::of(&col(|t| t.mu_hat)),
            eps_abs: Moments::of(&col(|t| t.eps_abs)),
            eps_rel: Moments::of(&col(|t| t.eps_rel)),
            seeds: trials.iter().map(|t| t.seed).collect(),
            trials,
            config,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub trial: usize,
    pub samples_used: usize,
    pub mu_hat: f64,
    pub std_err: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterRow {
    pub trial: usize,
    pub iteration: usize,
    pub gamma_k: f64,
    pub elite_count: usize,
    pub mu_hat_running: f64,
}

/// Running estimate every `⌈n_total / 250⌉` samples and at the end.
pub fn curve_rows(trial: usize, records: &[SampleRecord], gamma: f64, n_total: usize) -> Vec<CurveRow> {
    let every = n_total.div_ceil(250).max(1);
    let mut acc = RunningEstimate::default();
    let mut rows = Vec::new();
    for (i, r) in records.iter().enumerate() {
        acc.push(r, gamma);
        if (i + 1) % every == 0 || i + 1 == records.len() {
            rows.push(CurveRow { trial, samples_used: i + 1, mu_hat: acc.mean(), std_err: acc.std_err() });
        }
    }
    rows
}

pub fn iter_rows(trial: usize, iters: &[IterationDiag]) -> Vec<IterRow> {
    iters
        .iter()
        .map(|d| IterRow {
            trial,
            iteration: d.iteration,
            gamma_k: d.gamma_k,
            elite_count: d.elite_count,
            mu_hat_running: d.mu_hat_running,
        })
        .collect()
}

pub fn write_curve_csv(path: &Path, rows: &[CurveRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "trial,samples_used,mu_hat,std_err")?;
    for r in rows {
        writeln!(f, "{},{},{},{}", r.trial, r.samples_used, r.mu_hat, r.std_err)?;
    }
    f.flush()?;
    Ok(())
}

pub fn write_iters_csv(path: &Path, rows: &[IterRow]) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "trial,iteration,gamma_k,elite_count,mu_hat_running")?;
    for r in rows {
        writeln!(f, "{},{},{},{},{}", r.trial, r.iteration, r.gamma_k, r.elite_count, r.mu_hat_running)?;
    }
    f.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(ret: f64) -> SampleRecord {
        SampleRecord { ret, log_weight: 0.0, proposal_index: 0 }
    }

    #[test]
    fn curve_has_one_point_per_interval() {
        let records: Vec<_> = (0..100).map(|i| rec(if i % 10 == 0 { 1.0 } else { 0.0 })).collect();
        let rows = curve_rows(0, &records, 0.5, 100);
        assert_eq!(rows.len(), 100);
        assert_eq!(rows[99].mu_hat, 0.1);
        let rows = curve_rows(0, &records, 0.5, 50_000);
        assert_eq!(rows.len(), 1);
        let big: Vec<_> = (0..50_000).map(|_| rec(0.0)).collect();
        let rows = curve_rows(2, &big, 0.5, 50_000);
        assert_eq!(rows.len(), 250);
        assert_eq!(rows[0].samples_used, 200);
        assert!(rows.iter().all(|r| r.trial == 2));
    }

    #[test]
    fn moments() {
        let m = Moments::of(&[1.0, 3.0]);
        assert_eq!(m.mean, 2.0);
        assert!((m.std - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(Moments::of(&[4.0]).std, 0.0);
    }
}
