use super::adaptive::{run_adaptive, IterationContext, Population};
use super::mixture::WeightedBatch;
use super::{EstimatorConfig, Estimate};
use crate::error::{Error, Result};
use crate::mdp::{Action, ActionKind, AdversarialMdp, NominalDist, Proposal, StreamRng};

/// Smallest standard deviation a fitted Gaussian may take.
pub const CEM_STD_FLOOR: f64 = 1e-2;

/// The same action distribution at every state.
#[derive(Clone, Debug, PartialEq)]
pub struct StateIndependent {
    pub dist: NominalDist,
}

impl StateIndependent {
    pub fn new(dist: NominalDist) -> Self {
        Self { dist }
    }

    pub fn mean_action(&self) -> f64 {
        match &self.dist {
            NominalDist::Gaussian { mean, .. } => mean[0],
            NominalDist::Categorical(p) => p.iter().enumerate().map(|(i, q)| i as f64 * q).sum(),
        }
    }
}

impl<E: AdversarialMdp + ?Sized> Proposal<E> for StateIndependent {
    fn action_kind(&self) -> Option<ActionKind> {
        Some(self.dist.kind())
    }

    fn sample(&self, _env: &E, _state: &E::State, rng: &mut StreamRng) -> Action {
        self.dist.sample(rng)
    }

    fn logprob(&self, _env: &E, _state: &E::State, action: &Action) -> Result<f64> {
        self.dist.logprob(action)
    }
}

/// Outcome of a weighted maximum-likelihood fit.
#[derive(Clone, Debug, PartialEq)]
pub enum CemFit {
    Updated(NominalDist),
    /// No positive weight among the samples; parameters stay as they were.
    NoEliteMass,
}

/// Weighted maximum-likelihood fit of a state-independent distribution to
/// `(action, weight)` pairs. Discrete fits are mixed with the uniform
/// distribution at rate `floor`; Gaussian deviations are kept above
/// [`CEM_STD_FLOOR`].
pub fn cem_update(current: &NominalDist, samples: &[(&Action, f64)], floor: f64) -> Result<CemFit> {
    let total: f64 = samples.iter().map(|(_, w)| w).sum();
    if !(total > 0.0) {
        return Ok(CemFit::NoEliteMass);
    }
    let fit = match current {
        NominalDist::Categorical(p) => {
            let n = p.len();
            let mut freq = vec![0.0; n];
            for (a, w) in samples {
                let i = a.as_discrete().filter(|&i| i < n).ok_or_else(|| {
                    Error::InvalidAction(format!("{a:?} outside a {n}-action support"))
                })?;
                freq[i] += w;
            }
            NominalDist::Categorical(freq.iter().map(|f| (1.0 - floor) * f / total + floor / n as f64).collect())
        }
        NominalDist::Gaussian { mean, .. } => {
            let dim = mean.len();
            let mut m = vec![0.0; dim];
            for (a, w) in samples {
                let v = continuous(a, dim)?;
                for d in 0..dim {
                    m[d] += w * v[d];
                }
            }
            m.iter_mut().for_each(|x| *x /= total);
            let mut var = vec![0.0; dim];
            for (a, w) in samples {
                let v = continuous(a, dim)?;
                for d in 0..dim {
                    var[d] += w * (v[d] - m[d]).powi(2);
                }
            }
            let std = var.iter().map(|v| (v / total).sqrt().max(CEM_STD_FLOOR)).collect();
            NominalDist::Gaussian { mean: m, std }
        }
    };
    Ok(CemFit::Updated(fit))
}

fn continuous(a: &Action, dim: usize) -> Result<&[f64]> {
    a.as_continuous()
        .filter(|v| v.len() == dim)
        .ok_or_else(|| Error::InvalidAction(format!("{a:?} is not a {dim}-dimensional continuous action")))
}

struct CemPopulation {
    members: Vec<StateIndependent>,
    floor: f64,
}

impl<E: AdversarialMdp> Population<E> for CemPopulation {
    fn members(&self) -> Vec<&dyn Proposal<E>> {
        self.members.iter().map(|m| m as &dyn Proposal<E>).collect()
    }

    fn update(&mut self, _env: &E, batch: &WeightedBatch<E::State>, ctx: IterationContext) -> Result<Vec<String>> {
        let coeffs = batch.elite_coefficients(ctx.gamma_k);
        let mut warnings = Vec::new();
        for (m, member) in self.members.iter_mut().enumerate() {
            let samples: Vec<(&Action, f64)> = batch
                .assigned_to(m)
                .into_iter()
                .filter(|&i| coeffs[i] > 0.0)
                .flat_map(|i| {
                    let c = coeffs[i];
                    batch.trajectories[i].actions.iter().map(move |a| (a, c))
                })
                .collect();
            match cem_update(&member.dist, &samples, self.floor)? {
                CemFit::Updated(d) => member.dist = d,
                CemFit::NoEliteMass => warnings.push(format!("member {m} has no elite samples; kept unchanged")),
            }
        }
        Ok(warnings)
    }

    fn mean_action(&self, _env: &E, m: usize, _state: &E::State) -> f64 {
        self.members[m].mean_action()
    }
}

/// Cross-entropy method with state-independent proposals initialised at the
/// nominal distribution of the initial state.
pub fn cem<E: AdversarialMdp>(config: &EstimatorConfig, env: &E) -> Result<Estimate> {
    let start = env.nominal(&env.initial_state()).into_owned();
    let mut population = CemPopulation {
        members: vec![StateIndependent::new(start); config.mixture_size],
        floor: config.prob_floor,
    };
    run_adaptive(config, env, &mut population)
}
