//! The safety-state wrapper.
//!
//! The wrapper tracks the remaining safety budget `z`, appends it to the
//! observation, and replaces the task cost with a constant `n` once `z`
//! becomes negative. With normalization on, `z` starts at 1 and is measured
//! in units of the budget `d`.

use rand::Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::mdp::{Action, CmdpSpec, Environment, Info, Outcome, Policy, Transition};
use crate::seed::{self, STREAM_BUDGET};

/// Info keys emitted by [`SauteEnv::step`]. These names are part of the
/// bridge wire protocol.
pub const INFO_TRUE_COST: &str = "true_cost";
pub const INFO_SAFETY_COST: &str = "safety_cost";
pub const INFO_NEXT_SAFE_STATE: &str = "next_safe_state";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BudgetSampling {
    Fixed {
        d: f64,
    },
    /// Meta training: a fresh budget per episode, uniform on `[lower, upper]`.
    Uniform {
        lower: f64,
        upper: f64,
    },
}

impl BudgetSampling {
    pub fn validate(&self) -> Result<()> {
        match *self {
            BudgetSampling::Fixed { d } if !(d >= 0.0) || !d.is_finite() => {
                Err(Error::config(format!("budget {d} must be finite and nonnegative")))
            }
            BudgetSampling::Uniform { lower, upper } if !(lower > 0.0 && lower <= upper && upper.is_finite()) => {
                Err(Error::config(format!("budget interval [{lower}, {upper}] needs 0 < lower <= upper")))
            }
            _ => Ok(()),
        }
    }

    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        match *self {
            BudgetSampling::Fixed { d } => d,
            BudgetSampling::Uniform { lower, upper } if lower == upper => lower,
            BudgetSampling::Uniform { lower, upper } => rng.random_range(lower..=upper),
        }
    }
}

/// The violation penalty `n`. `Infinite` is only meaningful for the exact
/// solver; runnable environments require a finite value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Penalty {
    Finite(f64),
    Infinite,
}

impl Penalty {
    pub fn value(self) -> f64 {
        match self {
            Penalty::Finite(n) => n,
            Penalty::Infinite => f64::INFINITY,
        }
    }
}

impl Serialize for Penalty {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Penalty::Finite(n) => s.serialize_f64(*n),
            Penalty::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Penalty {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(n) if n >= 0.0 && n.is_finite() => Ok(Penalty::Finite(n)),
            Raw::Num(n) => Err(serde::de::Error::custom(format!("penalty {n} must be finite and >= 0"))),
            Raw::Str(s) if s == "inf" || s == "infinite" => Ok(Penalty::Infinite),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("unknown penalty '{s}'"))),
        }
    }
}

/// Orientation of the task signal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// The signal is a cost; a violation emits `n`.
    #[default]
    MinimizeCost,
    /// The signal is a reward; a violation emits `-n` (so `n = 0` zeroes
    /// the reward).
    MaximizeReward,
}

impl Mode {
    /// +1 for costs, -1 for rewards: multiply a return by this to get a cost.
    pub fn cost_sign(self) -> f64 {
        match self {
            Mode::MinimizeCost => 1.0,
            Mode::MaximizeReward => -1.0,
        }
    }
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SauteConfig {
    pub budget: BudgetSampling,
    pub gamma_l: f64,
    pub reshape_n: Penalty,
    #[serde(default = "yes")]
    pub normalize: bool,
    #[serde(default)]
    pub mode: Mode,
    /// Off for the "no cost shaping" ablation: `z` is still tracked and
    /// reported but the emitted cost is the raw task cost.
    #[serde(default = "yes")]
    pub cost_shaping: bool,
}

impl SauteConfig {
    pub fn fixed(d: f64, gamma_l: f64, n: f64) -> Self {
        SauteConfig {
            budget: BudgetSampling::Fixed { d },
            gamma_l,
            reshape_n: Penalty::Finite(n),
            normalize: true,
            mode: Mode::MinimizeCost,
            cost_shaping: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.budget.validate()?;
        if !(self.gamma_l > 0.0 && self.gamma_l <= 1.0) {
            return Err(Error::config(format!("gamma_l {} not in (0, 1]", self.gamma_l)));
        }
        if self.reshape_n == Penalty::Infinite {
            return Err(Error::config("an infinite penalty is only supported by the exact solver"));
        }
        if self.normalize && self.budget == (BudgetSampling::Fixed { d: 0.0 }) {
            return Err(Error::config("cannot normalize the safety state by a zero budget"));
        }
        Ok(())
    }
}

/// Environment observation plus the safety state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SauteState {
    pub observation: Vec<f64>,
    pub z: f64,
}

impl SauteState {
    /// Observation with `z` appended as the last component.
    pub fn augmented(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.observation.len() + 1);
        v.extend_from_slice(&self.observation);
        v.push(self.z);
        v
    }

    pub fn from_augmented(values: &[f64]) -> Option<Self> {
        let (z, obs) = values.split_last()?;
        Some(SauteState { observation: obs.to_vec(), z: *z })
    }
}

/// Drops the safety state, returning the environment observation.
pub fn strip_augmentation(state: &SauteState) -> Vec<f64> {
    state.observation.clone()
}

/// Safety-state update: `(z - l) / gamma_l`, or `(z - l / d) / gamma_l`
/// when normalized.
pub fn safety_step(z: f64, safety_cost: f64, d: f64, gamma_l: f64, normalize: bool) -> Result<f64> {
    if normalize {
        if !(d > 0.0) {
            return Err(Error::config(format!("normalized safety step needs a positive budget, got {d}")));
        }
        Ok((z - safety_cost / d) / gamma_l)
    } else {
        Ok((z - safety_cost) / gamma_l)
    }
}

/// The reshaped cost: the task signal while `z >= 0`, the penalty after.
pub fn reshape_cost(task_cost: f64, z: f64, n: f64, mode: Mode) -> f64 {
    if z >= 0.0 {
        task_cost
    } else {
        match mode {
            Mode::MinimizeCost => n,
            Mode::MaximizeReward => 0.0 - n,
        }
    }
}

/// Wraps an environment with the safety state and cost reshaping.
#[derive(Clone, Debug)]
pub struct SauteEnv<E> {
    inner: E,
    cfg: SauteConfig,
    spec: CmdpSpec,
    // remaining budget in cost units; the exposed z is this over the budget
    // when normalizing, so exact ties at zero survive normalization
    raw: f64,
    z: f64,
    budget: f64,
    done: bool,
}

impl<E: Environment> SauteEnv<E> {
    pub fn new(inner: E, cfg: SauteConfig) -> Result<Self> {
        cfg.validate()?;
        let mut spec = inner.spec().clone();
        spec.state_dim += 1;
        spec.gamma_l = cfg.gamma_l;
        let budget = match cfg.budget {
            BudgetSampling::Fixed { d } => d,
            BudgetSampling::Uniform { lower, .. } => lower,
        };
        spec.budget_d = budget;
        let z = if cfg.normalize { 1.0 } else { budget };
        Ok(SauteEnv { inner, cfg, spec, raw: budget, z, budget, done: false })
    }

    pub fn config(&self) -> &SauteConfig {
        &self.cfg
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }

    pub fn into_inner(self) -> E {
        self.inner
    }

    /// Budget of the current episode.
    pub fn budget(&self) -> f64 {
        self.budget
    }

    /// Safety state as exposed in observations.
    pub fn safety_state(&self) -> f64 {
        self.z
    }

    /// Remaining budget in raw cost units, i.e. the unnormalized `z`.
    pub fn raw_safety_state(&self) -> f64 {
        self.raw
    }

    /// Changes the budget used from the next reset on.
    pub fn set_budget(&mut self, budget: BudgetSampling) -> Result<()> {
        let mut cfg = self.cfg.clone();
        cfg.budget = budget;
        cfg.validate()?;
        self.cfg = cfg;
        Ok(())
    }

    pub fn is_done(&self) -> bool {
        self.done
    }

    fn advance(&mut self, task_cost: f64, safety_cost: f64) -> Result<(f64, f64)> {
        if !(safety_cost >= 0.0) {
            return Err(Error::NegativeSafetyCost { step: 0, cost: safety_cost });
        }
        self.raw = safety_step(self.raw, safety_cost, self.budget, self.cfg.gamma_l, false)?;
        let next = if self.cfg.normalize { self.raw / self.budget } else { self.raw };
        self.z = next;
        let cost = if self.cfg.cost_shaping {
            reshape_cost(task_cost, self.raw, self.cfg.reshape_n.value(), self.cfg.mode)
        } else {
            task_cost
        };
        Ok((next, cost))
    }
}

impl<E: Environment> Environment for SauteEnv<E> {
    fn spec(&self) -> &CmdpSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Result<Vec<f64>> {
        let obs = self.inner.reset(seed)?;
        self.budget = self.cfg.budget.sample(&mut seed::stream(seed, STREAM_BUDGET));
        self.spec.budget_d = self.budget;
        self.raw = self.budget;
        self.z = if self.cfg.normalize { 1.0 } else { self.budget };
        self.done = false;
        Ok(SauteState { observation: obs, z: self.z }.augmented())
    }

    fn step(&mut self, action: &Action) -> Result<Transition> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let tr = self.inner.step(action)?;
        let (next, cost) = self.advance(tr.task_cost, tr.safety_cost)?;
        self.done = tr.done;
        let mut info = tr.info;
        info.insert(INFO_TRUE_COST, tr.task_cost);
        info.insert(INFO_SAFETY_COST, tr.safety_cost);
        info.insert(INFO_NEXT_SAFE_STATE, next);
        let mut observation = tr.observation;
        observation.push(next);
        Ok(Transition { observation, task_cost: cost, safety_cost: tr.safety_cost, done: tr.done, info })
    }

    fn simulate(&mut self, action: &Action) -> Result<Outcome> {
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        let out = self.inner.simulate(action)?;
        let (_, cost) = self.advance(out.task_cost, out.safety_cost)?;
        self.done = out.done;
        Ok(Outcome { task_cost: cost, safety_cost: out.safety_cost, done: out.done })
    }
}

/// Runs a policy written for the unwrapped environment on a wrapped one,
/// hiding the safety state from it.
#[derive(Clone, Debug)]
pub struct Blind<P>(pub P);

impl<E: Environment, P: Policy<E>> Policy<SauteEnv<E>> for Blind<P> {
    fn reset(&mut self, seed: u64) {
        self.0.reset(seed)
    }

    fn act(&mut self, env: &SauteEnv<E>, observation: &[f64]) -> Result<Action> {
        let obs = &observation[..observation.len().saturating_sub(1)];
        self.0.act(env.inner(), obs)
    }
}

/// Wire-level info map for a wrapped step, in protocol key order.
pub fn wire_info(info: &Info) -> [(&'static str, f64); 3] {
    [
        (INFO_TRUE_COST, info.get(INFO_TRUE_COST).unwrap_or(f64::NAN)),
        (INFO_SAFETY_COST, info.get(INFO_SAFETY_COST).unwrap_or(f64::NAN)),
        (INFO_NEXT_SAFE_STATE, info.get(INFO_NEXT_SAFE_STATE).unwrap_or(f64::NAN)),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn safety_step_examples() {
        assert!((safety_step(1.0, 3.0, 30.0, 1.0, true).unwrap() - 0.9).abs() < 1e-15);
        assert_eq!(safety_step(30.0, 1.0, 0.0, 1.0, false).unwrap(), 29.0);
        assert_eq!(safety_step(0.5, 0.0, 10.0, 0.5, true).unwrap(), 1.0);
    }

    #[test]
    fn normalized_step_rejects_zero_budget() {
        assert!(safety_step(1.0, 0.0, 0.0, 1.0, true).is_err());
    }

    #[test]
    fn reshape_examples() {
        assert_eq!(reshape_cost(0.4, 0.2, 200.0, Mode::MinimizeCost), 0.4);
        assert_eq!(reshape_cost(0.4, -0.01, 200.0, Mode::MinimizeCost), 200.0);
        assert_eq!(reshape_cost(0.4, 0.0, 200.0, Mode::MinimizeCost), 0.4);
        assert_eq!(reshape_cost(0.4, -0.01, 200.0, Mode::MaximizeReward), -200.0);
    }

    #[test]
    fn zero_penalty_reward_mode_zeroes_the_reward() {
        let r = reshape_cost(0.93, -1e-3, 0.0, Mode::MaximizeReward);
        assert_eq!(r.to_bits(), 0.0f64.to_bits());
    }

    #[test]
    fn strip_projects_observation() {
        let s = SauteState { observation: vec![1.0, 2.0], z: 0.5 };
        assert_eq!(strip_augmentation(&s), vec![1.0, 2.0]);
        let again = SauteState { observation: strip_augmentation(&s), z: 0.7 };
        assert_eq!(strip_augmentation(&again), strip_augmentation(&s));
        assert_eq!(SauteState::from_augmented(&s.augmented()).unwrap(), s);
    }

    #[test]
    fn config_validation() {
        let mut cfg = SauteConfig::fixed(30.0, 1.0, 1.0);
        assert!(cfg.validate().is_ok());
        cfg.budget = BudgetSampling::Uniform { lower: 0.0, upper: 5.0 };
        assert!(cfg.validate().is_err());
        cfg.budget = BudgetSampling::Uniform { lower: 5.0, upper: 100.0 };
        cfg.reshape_n = Penalty::Infinite;
        assert!(cfg.validate().is_err());
        cfg.reshape_n = Penalty::Finite(1.0);
        cfg.budget = BudgetSampling::Fixed { d: 0.0 };
        assert!(cfg.validate().is_err());
        cfg.normalize = false;
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn penalty_json() {
        let p: Penalty = serde_json::from_str("\"inf\"").unwrap();
        assert_eq!(p, Penalty::Infinite);
        let p: Penalty = serde_json::from_str("200").unwrap();
        assert_eq!(p, Penalty::Finite(200.0));
        assert!(serde_json::from_str::<Penalty>("-1").is_err());
    }
}
