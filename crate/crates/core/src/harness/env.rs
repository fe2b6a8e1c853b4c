use serde::{Deserialize, Serialize};

use crate::chain::{exact_q, ChainMdp};
use crate::error::{Error, Result};
use crate::estimators::{estimate, Estimate, EstimatorConfig, Method};
use crate::mdp::{rollout, stream_rng, AdversarialMdp, NominalProposal};
use crate::par;
use crate::pendulum::{
    DisturbanceModel, DynamicsForm, Pendulum, PendulumParams, SpreadConvention, DEFAULT_GAMMA_FAIL_CONTINUOUS,
    DEFAULT_GAMMA_FAIL_DISCRETE,
};

/// Failure threshold on the chain's 0/1 return.
pub const CHAIN_GAMMA: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum EnvKind {
    #[serde(rename = "pendulum-discrete")]
    PendulumDiscrete,
    #[serde(rename = "pendulum-continuous")]
    PendulumContinuous,
    #[serde(rename = "chain")]
    Chain,
}

impl EnvKind {
    pub fn name(&self) -> &'static str {
        match self {
            EnvKind::PendulumDiscrete => "pendulum-discrete",
            EnvKind::PendulumContinuous => "pendulum-continuous",
            EnvKind::Chain => "chain",
        }
    }
}

impl std::str::FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pendulum-discrete" => Ok(EnvKind::PendulumDiscrete),
            "pendulum-continuous" => Ok(EnvKind::PendulumContinuous),
            "chain" => Ok(EnvKind::Chain),
            other => Err(Error::Config(format!(
                "unknown env `{other}` (expected pendulum-discrete, pendulum-continuous or chain)"
            ))),
        }
    }
}

/// Environment choice plus overrides.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub kind: EnvKind,
    /// Failure threshold on `max |θ|`; the calibrated default when absent.
    pub gamma_fail: Option<f64>,
    pub dynamics_form: DynamicsForm,
    pub continuous_std_convention: SpreadConvention,
    pub continuous_spread: f64,
}

impl EnvSpec {
    pub fn new(kind: EnvKind) -> Self {
        Self {
            kind,
            gamma_fail: None,
            dynamics_form: DynamicsForm::Standard,
            continuous_std_convention: SpreadConvention::Std,
            continuous_spread: 0.4,
        }
    }

    pub fn build(&self) -> Result<BuiltEnv> {
        let params = PendulumParams { form: self.dynamics_form, ..Default::default() };
        Ok(match self.kind {
            EnvKind::PendulumDiscrete => BuiltEnv::Pendulum(Pendulum::new(
                params,
                DisturbanceModel::discrete_default(),
                self.gamma_fail.unwrap_or(DEFAULT_GAMMA_FAIL_DISCRETE),
            )?),
            EnvKind::PendulumContinuous => BuiltEnv::Pendulum(Pendulum::new(
                params,
                DisturbanceModel::continuous(self.continuous_spread, self.continuous_std_convention),
                self.gamma_fail.unwrap_or(DEFAULT_GAMMA_FAIL_CONTINUOUS),
            )?),
            EnvKind::Chain => BuiltEnv::Chain(ChainMdp::default()),
        })
    }
}

/// A constructed environment.
#[derive(Clone, Debug)]
pub enum BuiltEnv {
    Pendulum(Pendulum),
    Chain(ChainMdp),
}

/// Monte Carlo failure count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct McCount {
    pub samples: u64,
    pub failures: u64,
}

fn count_failures<E: AdversarialMdp>(env: &E, gamma: f64, samples: u64, seed: u64) -> Result<McCount> {
    const CHUNK: u64 = 1 << 14;
    let chunks = samples.div_ceil(CHUNK);
    let counts = par::map_indexed(chunks as usize, |c| -> Result<u64> {
        let start = c as u64 * CHUNK;
        let end = (start + CHUNK).min(samples);
        let mut hits = 0;
        for i in start..end {
            let t = rollout(env, &NominalProposal, 0, &mut stream_rng(seed, i))?;
            hits += u64::from(t.ret > gamma);
        }
        Ok(hits)
    });
    let failures = counts.into_iter().sum::<Result<u64>>()?;
    Ok(McCount { samples, failures })
}

impl BuiltEnv {
    /// Final threshold `γ` on the return.
    pub fn threshold(&self) -> f64 {
        match self {
            BuiltEnv::Pendulum(p) => p.gamma_fail,
            BuiltEnv::Chain(_) => CHAIN_GAMMA,
        }
    }

    pub fn estimate(&self, method: Method, config: &EstimatorConfig) -> Result<Estimate> {
        match self {
            BuiltEnv::Pendulum(p) => estimate(method, config, p),
            BuiltEnv::Chain(c) => estimate(method, config, c),
        }
    }

    /// Counts nominal rollouts with return above `gamma`; rollout `i` uses
    /// stream `(seed, i)`.
    pub fn count_failures(&self, gamma: f64, samples: u64, seed: u64) -> Result<McCount> {
        match self {
            BuiltEnv::Pendulum(p) => count_failures(p, gamma, samples, seed),
            BuiltEnv::Chain(c) => count_failures(c, gamma, samples, seed),
        }
    }

    /// Exact failure probability when the environment can be enumerated.
    pub fn oracle_mu(&self) -> Option<f64> {
        match self {
            BuiltEnv::Chain(c) => exact_q(c, CHAIN_GAMMA).ok().map(|t| t.mu),
            BuiltEnv::Pendulum(_) => None,
        }
    }
}
