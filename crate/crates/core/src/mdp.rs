//! Constrained-MDP abstractions: specs, the environment and policy traits,
//! trajectory records and return/constraint accounting.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ActionSpace {
    Box { lower: Vec<f64>, upper: Vec<f64> },
    Discrete { n: usize },
}

impl ActionSpace {
    pub fn dim(&self) -> usize {
        match self {
            ActionSpace::Box { lower, .. } => lower.len(),
            ActionSpace::Discrete { .. } => 1,
        }
    }

    /// Builds an action from its wire representation (a flat number array).
    pub fn action_from_values(&self, values: &[f64]) -> Result<Action> {
        match self {
            ActionSpace::Box { lower, .. } => {
                if values.len() != lower.len() {
                    return Err(Error::InvalidAction(format!(
                        "expected {} components, got {}",
                        lower.len(),
                        values.len()
                    )));
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidAction("non-finite component".into()));
                }
                Ok(Action::Continuous(SmallVec::from_slice(values)))
            }
            ActionSpace::Discrete { n } => match values {
                [v] if v.fract() == 0.0 && *v >= 0.0 && (*v as usize) < *n => Ok(Action::Discrete(*v as usize)),
                _ => Err(Error::InvalidAction(format!("expected one integer in [0, {n}), got {values:?}"))),
            },
        }
    }
}

/// A constrained MDP: task discount, safety discount, budget and horizon.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CmdpSpec {
    pub state_dim: usize,
    pub action_space: ActionSpace,
    pub gamma_c: f64,
    pub gamma_l: f64,
    pub budget_d: f64,
    pub horizon: usize,
}

impl CmdpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.state_dim == 0 {
            return Err(Error::spec("state_dim must be positive"));
        }
        if !(self.gamma_c > 0.0 && self.gamma_c <= 1.0) {
            return Err(Error::spec(format!("gamma_c {} not in (0, 1]", self.gamma_c)));
        }
        if !(self.gamma_l > 0.0 && self.gamma_l <= 1.0) {
            return Err(Error::spec(format!("gamma_l {} not in (0, 1]", self.gamma_l)));
        }
        if !(self.budget_d >= 0.0) {
            return Err(Error::spec(format!("budget_d {} is negative", self.budget_d)));
        }
        if self.horizon == 0 {
            return Err(Error::spec("horizon must be at least 1"));
        }
        match &self.action_space {
            ActionSpace::Box { lower, upper } => {
                if lower.is_empty() || lower.len() != upper.len() {
                    return Err(Error::spec("box bounds must be non-empty and of equal length"));
                }
                if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
                    return Err(Error::spec("box lower bound exceeds upper bound"));
                }
            }
            ActionSpace::Discrete { n } => {
                if *n == 0 {
                    return Err(Error::spec("discrete action space must be non-empty"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Action {
    Discrete(usize),
    Continuous(SmallVec<[f64; 4]>),
}

impl Action {
    pub fn continuous(values: &[f64]) -> Self {
        Action::Continuous(SmallVec::from_slice(values))
    }

    /// Flat numeric form, as logged in trajectories and sent over the wire.
    pub fn to_values(&self) -> Vec<f64> {
        match self {
            Action::Discrete(i) => vec![*i as f64],
            Action::Continuous(v) => v.to_vec(),
        }
    }

    pub fn discrete_index(&self) -> Result<usize> {
        match self {
            Action::Discrete(i) => Ok(*i),
            Action::Continuous(_) => Err(Error::InvalidAction("expected a discrete action".into())),
        }
    }

    pub fn scalar(&self) -> Result<f64> {
        match self {
            Action::Continuous(v) if v.len() == 1 => Ok(v[0]),
            _ => Err(Error::InvalidAction("expected a one-dimensional continuous action".into())),
        }
    }
}

/// Per-step side information. Keys are fixed strings so that step results do
/// not allocate key storage.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Info(Vec<(&'static str, f64)>);

impl Info {
    pub fn new() -> Self {
        Info(Vec::new())
    }

    pub fn insert(&mut self, key: &'static str, value: f64) {
        match self.0.iter_mut().find(|(k, _)| *k == key) {
            Some(entry) => entry.1 = value,
            None => self.0.push((key, value)),
        }
    }

    pub fn get(&self, key: &str) -> Option<f64> {
        self.0.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&'static str, f64)> + '_ {
        self.0.iter().copied()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl Serialize for Info {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeMap;
        let mut map = serializer.serialize_map(Some(self.0.len()))?;
        for (k, v) in &self.0 {
            map.serialize_entry(k, v)?;
        }
        map.end()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub observation: Vec<f64>,
    pub task_cost: f64,
    pub safety_cost: f64,
    pub done: bool,
    pub info: Info,
}

/// Costs and termination of a step without the observation; used by planners.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Outcome {
    pub task_cost: f64,
    pub safety_cost: f64,
    pub done: bool,
}

/// A (possibly stochastic) environment emitting a task cost and a
/// nonnegative safety cost per step.
///
/// Implementations must replay identically for the same seed and action
/// sequence.
pub trait Environment {
    fn spec(&self) -> &CmdpSpec;

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>>;

    fn step(&mut self, action: &Action) -> Result<Transition>;

    /// Same state change as [`Environment::step`] but skips building the
    /// observation and info. Planners call this in their inner loop.
    fn simulate(&mut self, action: &Action) -> Result<Outcome> {
        let t = self.step(action)?;
        Ok(Outcome { task_cost: t.task_cost, safety_cost: t.safety_cost, done: t.done })
    }
}

/// A decision rule. The environment is passed read-only so that known-model
/// planners can clone it; reactive policies ignore it.
pub trait Policy<E: ?Sized> {
    fn reset(&mut self, _seed: u64) {}

    fn act(&mut self, env: &E, observation: &[f64]) -> Result<Action>;
}

/// Adapts a closure over observations into a [`Policy`].
#[derive(Clone)]
pub struct FnPolicy<F>(pub F);

impl<E: ?Sized, F: FnMut(&[f64]) -> Action> Policy<E> for FnPolicy<F> {
    fn act(&mut self, _env: &E, observation: &[f64]) -> Result<Action> {
        Ok((self.0)(observation))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub observation: Vec<f64>,
    pub action: Vec<f64>,
    /// Raw task cost (the `true_cost` info entry when the environment is
    /// wrapped, the emitted cost otherwise).
    pub task_cost: f64,
    pub safety_cost: f64,
    /// Cost as emitted by the environment, after any reshaping.
    pub emitted_cost: f64,
    /// Safety state after the step, when the environment reports one.
    pub z: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub steps: Vec<StepRecord>,
    pub seed: u64,
    pub gamma_l: f64,
    /// Discounted accumulated safety cost.
    pub budget_used: f64,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn task_costs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.task_cost).collect()
    }

    pub fn safety_costs(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.safety_cost).collect()
    }
}

/// Runs one episode of at most `horizon` steps.
pub fn rollout<E, P>(env: &mut E, policy: &mut P, horizon: usize, seed: u64) -> Result<TrajectoryRecord>
where
    E: Environment,
    P: Policy<E> + ?Sized,
{
    if horizon == 0 {
        return Err(Error::spec("rollout horizon must be at least 1"));
    }
    let gamma_l = env.spec().gamma_l;
    let wrap = |step: usize| move |e: Error| Error::Rollout { step, source: Box::new(e) };

    let mut observation = env.reset(seed).map_err(wrap(0))?;
    check_finite(&observation).map_err(wrap(0))?;
    policy.reset(seed);

    let mut steps = Vec::with_capacity(horizon.min(4096));
    let mut budget_used = 0.0;
    let mut discount = 1.0;
    for t in 0..horizon {
        let action = policy.act(env, &observation).map_err(wrap(t))?;
        let tr = env.step(&action).map_err(wrap(t))?;
        if !(tr.safety_cost >= 0.0) {
            return Err(wrap(t)(Error::NegativeSafetyCost { step: t, cost: tr.safety_cost }));
        }
        check_finite(&tr.observation).map_err(wrap(t))?;
        budget_used += discount * tr.safety_cost;
        discount *= gamma_l;
        steps.push(StepRecord {
            observation: std::mem::replace(&mut observation, tr.observation),
            action: action.to_values(),
            task_cost: tr.info.get("true_cost").unwrap_or(tr.task_cost),
            safety_cost: tr.safety_cost,
            emitted_cost: tr.task_cost,
            z: tr.info.get("next_safe_state"),
        });
        if tr.done {
            break;
        }
    }
    Ok(TrajectoryRecord { steps, seed, gamma_l, budget_used })
}

fn check_finite(observation: &[f64]) -> Result<()> {
    match observation.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(Error::NonFiniteObservation { index, value: observation[index] }),
        None => Ok(()),
    }
}

/// `sum_t gamma^t * costs[t]`.
pub fn discounted_sum(costs: &[f64], gamma: f64) -> f64 {
    let mut acc = 0.0;
    let mut discount = 1.0;
    for &c in costs {
        acc += discount * c;
        discount *= gamma;
    }
    acc
}

pub fn discounted_task_return(traj: &TrajectoryRecord, gamma_c: f64) -> f64 {
    discounted_sum(&traj.task_costs(), gamma_c)
}

/// `d - sum_t gamma_l^t l_t`; negative means the constraint is violated.
pub fn safety_margin(traj: &TrajectoryRecord, d: f64, gamma_l: f64) -> Result<f64> {
    let costs = traj.safety_costs();
    check_nonnegative(&costs)?;
    Ok(d - discounted_sum(&costs, gamma_l))
}

fn check_nonnegative(costs: &[f64]) -> Result<()> {
    match costs.iter().position(|c| !(*c >= 0.0)) {
        Some(step) => Err(Error::NegativeSafetyCost { step, cost: costs[step] }),
        None => Ok(()),
    }
}

/// Checks that "every discounted prefix sum stays within `d`" and "the total
/// stays within `d`" agree. With nonnegative costs the prefix sums are
/// nondecreasing so this always holds; it is a runtime assertion.
pub fn prefix_constraint_equivalence(traj: &TrajectoryRecord, d: f64, gamma_l: f64) -> bool {
    prefix_equivalence_for(&traj.safety_costs(), d, gamma_l)
}

pub(crate) fn prefix_equivalence_for(costs: &[f64], d: f64, gamma_l: f64) -> bool {
    let mut partial = 0.0;
    let mut discount = 1.0;
    let mut all_prefixes = true;
    for &c in costs {
        partial += discount * c;
        discount *= gamma_l;
        all_prefixes &= partial <= d;
    }
    all_prefixes == (partial <= d)
}
