//! Rare-event probability estimation for sequential decision-making systems.
//!
//! The crate learns state-dependent proposal policies that steer an
//! environment's stochasticity toward failures, and reweights the resulting
//! trajectories to obtain unbiased failure-probability estimates.
//!
//! * [`mdp`]: adversarial MDP interface, rollouts and importance weights.
//! * [`pendulum`]: disturbed inverted pendulum with discrete or continuous torques.
//! * [`chain`]: enumerable toy MDP with exact oracle tables.
//! * [`neural`]: MLPs, Adam and policy heads.
//! * [`estimators`]: Monte Carlo, cross-entropy, policy-gradient and value-based
//!   adaptive importance sampling, with mixture proposals.
//! * [`harness`]: experiment configuration, ground truth, reports and ablations.

pub mod chain;
pub mod error;
pub mod estimators;
pub mod harness;
pub mod math;
pub mod mdp;
pub mod neural;
pub mod par;
pub mod pendulum;

pub use error::{Error, Result};
