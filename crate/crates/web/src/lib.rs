//! Browser bindings for the demo page in `www/`.
//!
//! Every exported function takes a JSON request string and returns a JSON
//! string. The plain Rust versions underneath are what the tests exercise.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use saute_core::agents::{CemPlanConfig, CemPlanner};
use saute_core::envs::{wrap_angle, Gridworld, GridworldParams, PendulumEnv, PendulumParams};
use saute_core::mdp::rollout;
use saute_core::saute::{reshape_cost, safety_step, Mode, Penalty};
use saute_core::solver::{build_saute_mdp, finite_horizon, Interpolation, ZGrid};
use saute_core::{Result, SauteConfig, SauteEnv};

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PendulumRequest {
    pub budget: f64,
    #[serde(default = "yes")]
    pub shaping: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_population")]
    pub population: usize,
}

fn yes() -> bool {
    true
}

fn default_horizon() -> usize {
    200
}

fn default_population() -> usize {
    40
}

#[derive(Clone, Debug, Serialize)]
pub struct PendulumEpisode {
    /// Pole angle in degrees after each step, 0 upright.
    pub theta_deg: Vec<f64>,
    pub z: Vec<f64>,
    pub reward: Vec<f64>,
    pub safety_cost: Vec<f64>,
    pub total_reward: f64,
    pub total_safety: f64,
    pub violated: bool,
}

/// One CEM-controlled swing-up episode. With `shaping` off the planner sees
/// the raw reward and ignores the budget.
pub fn pendulum_episode(req: &PendulumRequest) -> Result<PendulumEpisode> {
    let params = PendulumParams { horizon: req.horizon, budget_d: req.budget, ..PendulumParams::default() };
    let mut saute = SauteConfig::fixed(req.budget, 1.0, 1.0);
    saute.mode = Mode::MaximizeReward;
    saute.cost_shaping = req.shaping;
    let mut env = SauteEnv::new(PendulumEnv::new(params)?, saute)?;
    let cem = CemPlanConfig { population: req.population, ..CemPlanConfig::default() };
    let mut planner = CemPlanner::new(cem, Mode::MaximizeReward)?;
    let traj = rollout(&mut env, &mut planner, req.horizon, req.seed)?;

    let mut out = PendulumEpisode {
        theta_deg: Vec::with_capacity(traj.len()),
        z: Vec::with_capacity(traj.len()),
        reward: traj.task_costs(),
        safety_cost: traj.safety_costs(),
        total_reward: 0.0,
        total_safety: traj.budget_used,
        violated: traj.budget_used > req.budget,
    };
    out.total_reward = out.reward.iter().sum();
    // observations are recorded before each step, so read the angle from the
    // next step and finish with the live state
    for w in traj.steps.windows(2) {
        out.theta_deg.push(angle_deg(&w[1].observation));
    }
    out.theta_deg.push(wrap_angle(env.inner().state().theta).to_degrees());
    out.z = traj.steps.iter().map(|s| s.z.unwrap_or(f64::NAN)).collect();
    Ok(out)
}

fn angle_deg(obs: &[f64]) -> f64 {
    obs[1].atan2(obs[0]).to_degrees()
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRequest {
    pub safety_costs: Vec<f64>,
    /// Defaults to 1 per step.
    #[serde(default)]
    pub task_costs: Option<Vec<f64>>,
    pub budget: f64,
    #[serde(default = "one")]
    pub gamma_l: f64,
    #[serde(default = "yes")]
    pub normalize: bool,
    pub penalty: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize)]
pub struct SafetyTrace {
    /// Safety state before the first step and after every step.
    pub z: Vec<f64>,
    pub emitted: Vec<f64>,
    pub first_violation: Option<usize>,
}

/// Replays a cost sequence through the safety-state update and reshaping.
pub fn safety_trace(req: &TraceRequest) -> Result<SafetyTrace> {
    if !(req.gamma_l > 0.0 && req.gamma_l <= 1.0) {
        return Err(saute_core::Error::InvalidConfig(format!("gamma_l {} not in (0, 1]", req.gamma_l)));
    }
    if let Some(t) = &req.task_costs {
        if t.len() != req.safety_costs.len() {
            return Err(saute_core::Error::InvalidConfig("task_costs and safety_costs differ in length".into()));
        }
    }
    let mut z = if req.normalize { 1.0 } else { req.budget };
    let mut out = SafetyTrace { z: vec![z], emitted: Vec::new(), first_violation: None };
    for (i, &l) in req.safety_costs.iter().enumerate() {
        if l.is_nan() || l < 0.0 {
            return Err(saute_core::Error::InvalidConfig(format!("safety cost {l} at step {i} is negative")));
        }
        z = safety_step(z, l, req.budget, req.gamma_l, req.normalize)?;
        let task = req.task_costs.as_ref().map_or(1.0, |t| t[i]);
        out.emitted.push(reshape_cost(task, z, req.penalty, Mode::MinimizeCost));
        if z < 0.0 && out.first_violation.is_none() {
            out.first_violation = Some(i);
        }
        out.z.push(z);
    }
    Ok(out)
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorridorRequest {
    pub budget: u32,
    pub penalty: f64,
    #[serde(default)]
    pub slip: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CorridorSolution {
    pub width: usize,
    pub height: usize,
    pub layout: Vec<String>,
    /// Row-major optimal value at the full budget; null on walls and where
    /// the budget cannot be kept.
    pub values: Vec<Option<f64>>,
    /// Greedy first move per cell, as an index into up, right, down, left.
    pub actions: Vec<Option<usize>>,
    /// Most likely path of the greedy policy from the first start cell.
    pub path: Vec<usize>,
    pub start_value: f64,
}

/// Exact backward induction on the two-corridor gridworld.
pub fn corridor_values(req: &CorridorRequest) -> Result<CorridorSolution> {
    let mut params = GridworldParams::two_corridor(req.slip);
    params.budget_d = f64::from(req.budget);
    let world = Gridworld::new(params)?;
    let horizon = world.params().horizon;
    let penalty = if req.penalty.is_infinite() { Penalty::Infinite } else { Penalty::Finite(req.penalty) };
    let mdp =
        build_saute_mdp(world.to_finite_cmdp(), ZGrid::integer(req.budget as usize), penalty, Interpolation::Nearest)?;
    let table = finite_horizon(&mdp, horizon);
    let top = mdp.budget_node();

    let n = world.num_cells();
    let mut values = Vec::with_capacity(n);
    let mut actions = Vec::with_capacity(n);
    for s in 0..n {
        let v = table.value(s, top);
        let open = !world.is_wall(s) && v.is_finite();
        values.push(open.then_some(v));
        actions.push((open && !world.is_goal(s)).then(|| table.action(0, s, top)));
    }

    let start = world.starts()[0];
    let mut path = vec![start];
    let (mut x, mut t) = (mdp.aug_index(start, top), 0);
    while t < horizon && !world.is_goal(mdp.split_index(x).0) {
        let (s, zi) = mdp.split_index(x);
        let a = table.action(t, s, zi);
        let Some(&(next, _)) = mdp.successors(x, a).iter().max_by(|a, b| a.1.total_cmp(&b.1)) else { break };
        x = next as usize;
        path.push(mdp.split_index(x).0);
        t += 1;
    }

    Ok(CorridorSolution {
        width: world.width(),
        height: world.height(),
        layout: world.params().layout.clone(),
        values,
        actions,
        path,
        start_value: table.value(start, top),
    })
}

fn call<Req, Res>(request: &str, f: impl FnOnce(&Req) -> Result<Res>) -> std::result::Result<String, JsError>
where
    Req: for<'de> Deserialize<'de>,
    Res: Serialize,
{
    let req: Req = serde_json::from_str(request).map_err(|e| JsError::new(&format!("bad request: {e}")))?;
    let res = f(&req).map_err(|e| JsError::new(&e.to_string()))?;
    serde_json::to_string(&res).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen(js_name = pendulumEpisode)]
pub fn pendulum_episode_js(request: &str) -> std::result::Result<String, JsError> {
    call(request, pendulum_episode)
}

#[wasm_bindgen(js_name = safetyTrace)]
pub fn safety_trace_js(request: &str) -> std::result::Result<String, JsError> {
    call(request, safety_trace)
}

#[wasm_bindgen(js_name = corridorValues)]
pub fn corridor_values_js(request: &str) -> std::result::Result<String, JsError> {
    call(request, corridor_values)
}
