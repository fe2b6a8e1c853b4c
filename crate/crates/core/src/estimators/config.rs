use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Estimation algorithm.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Mc,
    Cem,
    Pg,
    Vb,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Mc => "mc",
            Method::Cem => "cem",
            Method::Pg => "pg",
            Method::Vb => "vb",
        }
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mc" => Ok(Method::Mc),
            "cem" => Ok(Method::Cem),
            "pg" => Ok(Method::Pg),
            "vb" => Ok(Method::Vb),
            other => Err(Error::Config(format!("unknown method `{other}` (expected mc, cem, pg or vb)"))),
        }
    }
}

/// Partial importance weight applied to each transition in the value loss.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValueWeighting {
    /// Weight through the scored action, `w(s_{i+1})`.
    Action,
    /// Weight of the state the action is taken in, `w(s_i)`.
    State,
    /// Unweighted regression.
    None,
}

/// Settings shared by every estimator. Fields irrelevant to a method are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    /// Final failure threshold.
    pub gamma: f64,
    /// Elite fraction used for the intermediate threshold.
    pub rho: f64,
    /// Trajectories sampled per iteration, split evenly across mixture components.
    pub n_per_iter: usize,
    /// Total sampling budget.
    pub n_total: usize,
    /// Number of trained proposals `M`.
    pub mixture_size: usize,
    pub pretrain: bool,
    pub pretrain_epochs: usize,
    pub pretrain_points: usize,
    pub pretrain_learning_rate: f64,
    pub value_pretrain_target: f64,
    /// Adds the nominal distribution as an untrained mixture component.
    pub defensive: bool,
    /// Learned state-dependent baseline for the policy gradient.
    pub baseline: bool,
    pub batch_size: usize,
    /// Value updates between target-network refreshes.
    pub target_interval: usize,
    pub learning_rate: f64,
    /// Global gradient-norm clip; non-positive disables clipping.
    pub grad_clip: f64,
    /// Full-batch gradient steps per iteration for policy and baseline networks.
    pub policy_epochs: usize,
    /// Value-network gradient steps per iteration.
    pub value_epochs: usize,
    /// With learning disabled every member is the nominal distribution.
    pub learn: bool,
    pub buffer_capacity: usize,
    pub vb_action_samples: usize,
    /// Re-evaluate replayed partial weights under the current mixture
    /// instead of using the weights stored at insertion.
    pub recompute_replay_weights: bool,
    /// One replay buffer for all members; otherwise each member keeps the
    /// samples assigned to it.
    pub shared_replay: bool,
    pub value_weighting: ValueWeighting,
    pub quadrature_nodes: usize,
    /// Mixing weight toward a full-support distribution for discrete proposals.
    pub prob_floor: f64,
    /// Initial standard deviation of Gaussian policies that are not pretrained.
    pub init_std: f64,
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn for_method(method: Method) -> Self {
        let n_per_iter = if method == Method::Vb { 20 } else { 200 };
        Self {
            gamma: 0.0,
            rho: 0.1,
            n_per_iter,
            n_total: 50_000,
            mixture_size: 1,
            pretrain: true,
            pretrain_epochs: 100,
            pretrain_points: 10_000,
            pretrain_learning_rate: 3e-4,
            value_pretrain_target: 0.1,
            defensive: false,
            baseline: false,
            batch_size: 1024,
            target_interval: 10,
            learning_rate: 3e-4,
            grad_clip: 1.0,
            policy_epochs: 1,
            value_epochs: 1,
            learn: true,
            buffer_capacity: 64_000,
            vb_action_samples: 4,
            recompute_replay_weights: true,
            shared_replay: true,
            value_weighting: ValueWeighting::Action,
            quadrature_nodes: 16,
            prob_floor: 1e-3,
            init_std: 1.0,
            seed: 0,
        }
    }

    /// Mixture components sampled each iteration, including the defensive one.
    pub fn components(&self) -> usize {
        self.mixture_size + usize::from(self.defensive)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !self.gamma.is_finite() {
            return bad(format!("gamma must be finite, got {}", self.gamma));
        }
        if !(self.rho > 0.0 && self.rho <= 1.0) {
            return bad(format!("rho must lie in (0, 1], got {}", self.rho));
        }
        // A batch larger than the budget is simply truncated.
        if self.n_per_iter == 0 || self.n_total == 0 {
            return bad(format!(
                "n_per_iter and n_total must be positive, got {} and {}",
                self.n_per_iter, self.n_total
            ));
        }
        if self.mixture_size == 0 {
            return bad("mixture_size must be at least 1".into());
        }
        if self.components() > self.n_per_iter {
            return bad(format!(
                "{} mixture components cannot share {} samples per iteration",
                self.components(),
                self.n_per_iter
            ));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("target_interval", self.target_interval),
            ("vb_action_samples", self.vb_action_samples),
            ("quadrature_nodes", self.quadrature_nodes),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                return bad(format!("{name} must be positive"));
            }
        }
        if !(self.learning_rate > 0.0) || !(self.pretrain_learning_rate > 0.0) {
            return bad("learning rates must be positive".into());
        }
        if !(0.0..1.0).contains(&self.prob_floor) {
            return bad(format!("prob_floor must lie in [0, 1), got {}", self.prob_floor));
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std must be positive, got {}", self.init_std));
        }
        Ok(())
    }

    pub(crate) fn adam(&self) -> crate::neural::AdamConfig {
        crate::neural::AdamConfig {
            lr: self.learning_rate,
            clip_norm: (self.grad_clip > 0.0).then_some(self.grad_clip),
            ..Default::default()
        }
    }

    pub(crate) fn pretrain_adam(&self) -> crate::neural::AdamConfig {
        crate::neural::AdamConfig { lr: self.pretrain_learning_rate, ..self.adam() }
    }
}
