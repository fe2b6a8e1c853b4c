//! Inverted pendulum under a rule-based balancing controller, disturbed by
//! additive torques whose distribution is the adversarial action space.

use std::borrow::Cow;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::{Action, ActionKind, AdversarialMdp, NominalDist};

pub const HORIZON: usize = 20;
pub const MAX_SPEED: f64 = 8.0;
pub const MAX_TORQUE: f64 = 2.0;

pub const DISCRETE_TORQUES: [f64; 5] = [-1.0, -0.25, 0.0, 0.25, 1.0];
/// Probabilities as published; they sum to 1.002 and are renormalized on use.
pub const DISCRETE_PROBS_RAW: [f64; 5] = [0.016, 0.30, 0.37, 0.30, 0.016];

/// Failure threshold on `max |θ|` matching the published discrete failure rate.
pub const DEFAULT_GAMMA_FAIL_DISCRETE: f64 = 0.1855;
/// Failure threshold on `max |θ|` matching the published continuous failure rate.
pub const DEFAULT_GAMMA_FAIL_CONTINUOUS: f64 = 0.2557;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumState {
    pub t: usize,
    pub theta: f64,
    pub omega: f64,
    /// Running `max |θ|` over the visited states, carried so the return is sparse.
    pub max_abs_theta: f64,
}

impl PendulumState {
    pub fn upright() -> Self {
        Self { t: 0, theta: 0.0, omega: 0.0, max_abs_theta: 0.0 }
    }
}

/// How the gravity term enters the angular-velocity update.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DynamicsForm {
    /// `ω' = ω − (3g/2ℓ) sin(θ+π) + (3a/mℓ²) Δt`: gravity is not scaled by Δt.
    Verbatim,
    /// `ω' = ω + (−(3g/2ℓ) sin(θ+π) + 3a/mℓ²) Δt`.
    Standard,
}

/// Reading of the spread parameter of the continuous disturbance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpreadConvention {
    Std,
    Variance,
}

#[derive(Clone, Debug, PartialEq)]
pub enum DisturbanceModel {
    Discrete { torques: Vec<f64>, probs: Vec<f64> },
    Continuous { std: f64 },
}

impl DisturbanceModel {
    pub fn discrete_default() -> Self {
        let total: f64 = DISCRETE_PROBS_RAW.iter().sum();
        DisturbanceModel::Discrete {
            torques: DISCRETE_TORQUES.to_vec(),
            probs: DISCRETE_PROBS_RAW.iter().map(|p| p / total).collect(),
        }
    }

    pub fn continuous(spread: f64, convention: SpreadConvention) -> Self {
        let std = match convention {
            SpreadConvention::Std => spread,
            SpreadConvention::Variance => spread.sqrt(),
        };
        DisturbanceModel::Continuous { std }
    }

    fn validate(&self) -> Result<()> {
        match self {
            DisturbanceModel::Discrete { torques, probs } => {
                let s: f64 = probs.iter().sum();
                if torques.len() != probs.len() || (s - 1.0).abs() > 1e-12 || probs.iter().any(|&p| p <= 0.0) {
                    return Err(Error::InvalidArgument(format!(
                        "discrete disturbance needs matching positive probabilities summing to 1 (sum {s})"
                    )));
                }
            }
            DisturbanceModel::Continuous { std } => {
                if !(*std > 0.0) {
                    return Err(Error::InvalidArgument(format!("disturbance std must be positive, got {std}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PendulumParams {
    pub g: f64,
    pub length: f64,
    pub mass: f64,
    pub dt: f64,
    pub form: DynamicsForm,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self { g: 10.0, length: 1.0, mass: 1.0, dt: 0.05, form: DynamicsForm::Standard }
    }
}

#[derive(Clone, Debug)]
pub struct Pendulum {
    pub params: PendulumParams,
    pub disturbance: DisturbanceModel,
    pub gamma_fail: f64,
    nominal: NominalDist,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Rule-based balancing torque, clipped to the actuator limit.
pub fn controller_torque(s: &PendulumState) -> f64 {
    let omega_target = sign(s.theta) * (60.0 * (1.0 - s.theta.cos())).sqrt();
    let a = -2.0 * s.omega + (s.omega - omega_target);
    a.clamp(-MAX_TORQUE, MAX_TORQUE)
}

/// One transition under an additive disturbance torque.
///
/// The disturbance is added after the controller output is clipped and the sum
/// is not re-clipped. `sin(θ + π)` is evaluated as `−sin θ` so the dynamics
/// stay exactly odd-symmetric in floating point.
pub fn pendulum_step(p: &PendulumParams, s: &PendulumState, disturbance: f64) -> PendulumState {
    let a = controller_torque(s) + disturbance;
    // −(3g/2ℓ)·sin(θ + π) = (3g/2ℓ)·sin θ
    let gravity = 3.0 * p.g / (2.0 * p.length) * s.theta.sin();
    let actuation = 3.0 * a / (p.mass * p.length * p.length);
    let omega_raw = match p.form {
        DynamicsForm::Verbatim => s.omega + gravity + actuation * p.dt,
        DynamicsForm::Standard => s.omega + (gravity + actuation) * p.dt,
    };
    let theta = s.theta + s.omega * p.dt;
    PendulumState {
        t: s.t + 1,
        theta,
        omega: omega_raw.clamp(-MAX_SPEED, MAX_SPEED),
        max_abs_theta: s.max_abs_theta.max(theta.abs()),
    }
}

/// `R(τ) = max_t |θ_t|` over a sequence of angles.
pub fn risk_return(thetas: &[f64]) -> f64 {
    thetas.iter().fold(0.0, |m, t| m.max(t.abs()))
}

impl Pendulum {
    pub fn new(params: PendulumParams, disturbance: DisturbanceModel, gamma_fail: f64) -> Result<Self> {
        disturbance.validate()?;
        let nominal = match &disturbance {
            DisturbanceModel::Discrete { probs, .. } => NominalDist::Categorical(probs.clone()),
            DisturbanceModel::Continuous { std } => NominalDist::Gaussian { mean: vec![0.0], std: vec![*std] },
        };
        Ok(Self { params, disturbance, gamma_fail, nominal })
    }

    pub fn discrete() -> Self {
        Self::new(PendulumParams::default(), DisturbanceModel::discrete_default(), DEFAULT_GAMMA_FAIL_DISCRETE)
            .expect("default discrete pendulum is valid")
    }

    pub fn continuous() -> Self {
        Self::new(
            PendulumParams::default(),
            DisturbanceModel::continuous(0.4, SpreadConvention::Std),
            DEFAULT_GAMMA_FAIL_CONTINUOUS,
        )
        .expect("default continuous pendulum is valid")
    }

    /// Torque value of an action.
    pub fn torque(&self, a: &Action) -> Result<f64> {
        match (&self.disturbance, a) {
            (DisturbanceModel::Discrete { torques, .. }, Action::Discrete(i)) => torques
                .get(*i)
                .copied()
                .ok_or_else(|| Error::InvalidAction(format!("torque index {i} outside support"))),
            (DisturbanceModel::Continuous { .. }, Action::Continuous(v)) if v.len() == 1 => Ok(v[0]),
            _ => Err(Error::InvalidAction(format!("{a:?} does not match the disturbance model"))),
        }
    }

    /// Action whose torque is the negation of `a`'s.
    pub fn mirror(&self, a: &Action) -> Action {
        match a {
            Action::Discrete(i) => Action::Discrete(DISCRETE_TORQUES.len() - 1 - i),
            Action::Continuous(v) => Action::Continuous(v.iter().map(|x| -x).collect()),
        }
    }

    pub fn is_failure(&self, ret: f64) -> bool {
        ret > self.gamma_fail
    }
}

impl AdversarialMdp for Pendulum {
    type State = PendulumState;

    fn initial_state(&self) -> PendulumState {
        PendulumState::upright()
    }

    fn step(&self, s: &PendulumState, a: &Action) -> Result<(PendulumState, bool)> {
        let d = self.torque(a)?;
        let next = pendulum_step(&self.params, s, d);
        Ok((next, next.t >= HORIZON))
    }

    fn nominal(&self, _s: &PendulumState) -> Cow<'_, NominalDist> {
        Cow::Borrowed(&self.nominal)
    }

    fn terminal_return(&self, s: &PendulumState) -> f64 {
        s.max_abs_theta
    }

    fn horizon(&self) -> usize {
        HORIZON
    }

    fn action_kind(&self) -> ActionKind {
        match &self.disturbance {
            DisturbanceModel::Discrete { torques, .. } => ActionKind::Discrete { n: torques.len() },
            DisturbanceModel::Continuous { .. } => ActionKind::Continuous { dim: 1 },
        }
    }

    fn features(&self, s: &PendulumState) -> Vec<f64> {
        vec![s.t as f64 / HORIZON as f64, s.theta, s.omega / MAX_SPEED]
    }

    fn feature_dim(&self) -> usize {
        3
    }

    fn is_finite(&self, s: &PendulumState) -> bool {
        s.theta.is_finite() && s.omega.is_finite()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{rollout, stream_rng, NominalProposal, Proposal, StreamRng};
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn at(theta: f64, omega: f64) -> PendulumState {
        PendulumState { t: 0, theta, omega, max_abs_theta: theta.abs() }
    }

    #[test]
    fn controller_examples() {
        assert_eq!(controller_torque(&at(0.0, 0.0)), 0.0);
        assert_eq!(controller_torque(&at(0.0, 1.0)), -1.0);
        assert_eq!(controller_torque(&at(PI / 2.0, 0.0)), -2.0);
        assert_eq!(controller_torque(&at(-PI / 2.0, 0.0)), 2.0);
    }

    #[test]
    fn equilibrium_is_fixed_point() {
        let p = PendulumParams::default();
        let s = pendulum_step(&p, &at(0.0, 0.0), 0.0);
        assert_eq!((s.theta, s.omega, s.t), (0.0, 0.0, 1));
    }

    #[test]
    fn single_step_hand_values() {
        let mut p = PendulumParams::default();
        let s = pendulum_step(&p, &at(0.1, 0.0), 0.0);
        assert_eq!(s.theta, 0.1);
        assert!((s.omega - -0.007249092759637066).abs() < 1e-15);
        p.form = DynamicsForm::Verbatim;
        let s = pendulum_step(&p, &at(0.1, 0.0), 0.0);
        assert!((s.omega - 1.415377094457664).abs() < 1e-14);
    }

    #[test]
    fn omega_is_clipped() {
        let p = PendulumParams::default();
        let s = pendulum_step(&p, &at(1.2, 7.9), 5.0);
        assert_eq!(s.omega, MAX_SPEED);
        let s = pendulum_step(&p, &at(-1.2, -7.9), -5.0);
        assert_eq!(s.omega, -MAX_SPEED);
    }

    #[test]
    fn risk_examples() {
        assert_eq!(risk_return(&[0.0; 21]), 0.0);
        let r = risk_return(&[0.0, 0.1, -0.9]);
        assert_eq!(r, 0.9);
        assert!(Pendulum::discrete().gamma_fail < r);
        let env = Pendulum { gamma_fail: PI / 4.0, ..Pendulum::discrete() };
        assert!(env.is_failure(r));
        assert!(!env.is_failure(0.0));
    }

    #[test]
    fn zero_disturbance_keeps_pendulum_upright() {
        struct Zero;
        impl Proposal<Pendulum> for Zero {
            fn action_kind(&self) -> Option<ActionKind> {
                None
            }
            fn sample(&self, _: &Pendulum, _: &PendulumState, _: &mut StreamRng) -> Action {
                Action::scalar(0.0)
            }
            fn logprob(&self, _: &Pendulum, _: &PendulumState, _: &Action) -> Result<f64> {
                Ok(0.0)
            }
        }
        let env = Pendulum::continuous();
        let t = rollout(&env, &Zero, 0, &mut stream_rng(0, 0)).unwrap();
        assert_eq!(t.steps(), HORIZON);
        assert!(t.states.iter().all(|s| s.theta == 0.0 && s.omega == 0.0));
        assert_eq!(t.ret, 0.0);
    }

    #[test]
    fn nominal_log_densities() {
        let d = Pendulum::discrete();
        let lp = d.nominal_logprob(&PendulumState::upright(), &Action::Discrete(2)).unwrap();
        assert!((lp - -0.99625027600654).abs() < 1e-14);
        assert!(matches!(
            d.nominal_logprob(&PendulumState::upright(), &Action::Discrete(5)),
            Err(Error::InvalidAction(_))
        ));
        let c = Pendulum::continuous();
        let lp = c.nominal_logprob(&PendulumState::upright(), &Action::scalar(0.0)).unwrap();
        assert!((lp - -0.002647801330517642).abs() < 1e-14);
    }

    #[test]
    fn variance_convention() {
        match DisturbanceModel::continuous(0.4, SpreadConvention::Variance) {
            DisturbanceModel::Continuous { std } => assert!((std - 0.4f64.sqrt()).abs() < 1e-15),
            _ => unreachable!(),
        }
    }

    #[test]
    fn discrete_probabilities_renormalized() {
        match DisturbanceModel::discrete_default() {
            DisturbanceModel::Discrete { probs, .. } => {
                assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn extreme_torque_frequency() {
        let env = Pendulum::discrete();
        let s = PendulumState::upright();
        let mut rng = stream_rng(2024, 0);
        let n = 1_000_000;
        let hits = (0..n).filter(|_| env.nominal_sample(&s, &mut rng) == Action::Discrete(0)).count();
        let p = 0.016 / 1.002;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        let freq = hits as f64 / n as f64;
        assert!((freq - p).abs() < 4.0 * se, "{freq} vs {p}");
    }

    #[test]
    fn episodes_last_exactly_the_horizon_and_respect_clips() {
        for env in [Pendulum::discrete(), Pendulum::continuous()] {
            for i in 0..200 {
                let t = rollout(&env, &NominalProposal, 0, &mut stream_rng(5, i)).unwrap();
                assert_eq!(t.steps(), HORIZON);
                assert_eq!(t.states.last().unwrap().t, HORIZON);
                for s in &t.states {
                    assert!(s.omega.abs() <= MAX_SPEED);
                    assert!(controller_torque(s).abs() <= MAX_TORQUE);
                }
                let thetas: Vec<f64> = t.states.iter().map(|s| s.theta).collect();
                assert_eq!(t.ret, risk_return(&thetas));
            }
        }
    }

    proptest! {
        #[test]
        fn negated_disturbances_negate_the_trajectory(ds in proptest::collection::vec(-3.0f64..3.0, HORIZON)) {
            let p = PendulumParams::default();
            let mut a = PendulumState::upright();
            let mut b = PendulumState::upright();
            for d in ds {
                a = pendulum_step(&p, &a, d);
                b = pendulum_step(&p, &b, -d);
                prop_assert_eq!(a.theta, -b.theta);
                prop_assert_eq!(a.omega, -b.omega);
                prop_assert_eq!(a.max_abs_theta, b.max_abs_theta);
            }
        }

        #[test]
        fn mirrored_discrete_actions_have_equal_density(i in 0usize..5) {
            let env = Pendulum::discrete();
            let s = PendulumState::upright();
            let a = Action::Discrete(i);
            prop_assert_eq!(env.torque(&env.mirror(&a)).unwrap(), -env.torque(&a).unwrap());
            prop_assert_eq!(env.nominal_logprob(&s, &a).unwrap(), env.nominal_logprob(&s, &env.mirror(&a)).unwrap());
        }
    }
}
