use rand::Rng;

use super::cem::{box_bounds, ranking, score_all, PlanResult};
use crate::error::{Error, Result};
use crate::mdp::{Action, Environment, Policy};
use crate::saute::Mode;
use crate::seed::{self, SimRng, STREAM_POLICY};

/// Best of `samples` uniformly drawn action sequences, ties to the first.
pub fn random_shooting_plan<E>(
    model: &E,
    horizon: usize,
    samples: usize,
    sign: f64,
    rng: &mut SimRng,
) -> Result<PlanResult>
where
    E: Environment + Clone + Sync,
{
    if horizon == 0 || samples == 0 {
        return Err(Error::config("random shooting needs a positive horizon and sample count"));
    }
    let (lower, upper) = box_bounds(&model.spec().action_space)?;
    let dim = lower.len();
    let candidates: Vec<Vec<f64>> = (0..samples)
        .map(|_| {
            (0..horizon * dim)
                .map(|i| {
                    let (lo, hi) = (lower[i % dim], upper[i % dim]);
                    if lo == hi {
                        lo
                    } else {
                        rng.random_range(lo..=hi)
                    }
                })
                .collect()
        })
        .collect();
    let scores = score_all(model, &candidates, dim, sign)?;
    let best = ranking(&scores)[0];
    let sequence = candidates[best].clone();
    Ok(PlanResult {
        action: sequence[..dim].to_vec(),
        sequence,
        best_objective: vec![scores[best]],
        elite_objective: vec![scores[best]],
    })
}

#[derive(Clone, Debug)]
pub struct ShootingPlanner {
    horizon: usize,
    samples: usize,
    sign: f64,
    rng: SimRng,
}

impl ShootingPlanner {
    pub fn new(horizon: usize, samples: usize, objective: Mode) -> Result<Self> {
        if horizon == 0 || samples == 0 {
            return Err(Error::config("random shooting needs a positive horizon and sample count"));
        }
        Ok(ShootingPlanner { horizon, samples, sign: objective.cost_sign(), rng: seed::stream(0, STREAM_POLICY) })
    }
}

impl<E: Environment + Clone + Sync> Policy<E> for ShootingPlanner {
    fn reset(&mut self, seed: u64) {
        self.rng = seed::stream(seed, STREAM_POLICY);
    }

    fn act(&mut self, env: &E, _observation: &[f64]) -> Result<Action> {
        let plan = random_shooting_plan(env, self.horizon, self.samples, self.sign, &mut self.rng)?;
        Ok(Action::continuous(&plan.action))
    }
}
