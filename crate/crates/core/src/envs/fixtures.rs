//! Named finite c-MDPs used by the solver checks.
//!
//! `risky-chain` (3 states, 2 actions, `d = 1`, `gamma_c = 0.95`,
//! `gamma_l = 1`, horizon 20, start 0):
//!
//! ```text
//! state  action  c  l  next
//! 0      0       0  1  2 w.p. 0.5, 1 w.p. 0.5
//! 0      1       1  0  1
//! 1      0       0  1  2 w.p. 0.8, 1 w.p. 0.2
//! 1      1       1  0  2 w.p. 0.5, 1 w.p. 0.5
//! 2      *       0  0  2                (absorbing)
//! ```
//!
//! `det-chain` (4 states, 2 actions, `d = 1`, horizon 4, undiscounted,
//! start 0): both actions advance `s -> s + 1` until the absorbing state 3.
//! Action 0 is free with safety cost 1; action 1 is safe with task cost
//! `s + 1`.
//!
//! `two-corridor`: the gridworld of [`GridworldParams::two_corridor`] with
//! slip probability 0.1.
//!
//! `tiny-random(seed)`: a deterministic c-MDP with 2..=5 states, 2..=3
//! actions, integer safety costs in `0..=2`, budget `0..=4`, horizon `3..=6`,
//! `gamma_c` in `{1, 0.9}`, `gamma_l = 1` and start state 0.

use rand::Rng;

use super::gridworld::{Gridworld, GridworldParams};
use crate::error::{Error, Result};
use crate::seed;
use crate::solver::FiniteCmdp;

pub const FIXTURE_NAMES: [&str; 4] = ["risky-chain", "det-chain", "two-corridor", "tiny-random(<seed>)"];

pub fn make_fixture(name: &str) -> Result<FiniteCmdp> {
    let name = name.trim();
    match name {
        "risky-chain" => Ok(risky_chain()),
        "det-chain" => Ok(det_chain()),
        "two-corridor" => Ok(Gridworld::new(GridworldParams::two_corridor(0.1))?.to_finite_cmdp()),
        _ => {
            let seed = name
                .strip_prefix("tiny-random(")
                .and_then(|rest| rest.strip_suffix(')'))
                .and_then(|digits| digits.trim().parse::<u64>().ok())
                .ok_or_else(|| Error::UnknownFixture(name.to_string()))?;
            Ok(tiny_random(seed))
        }
    }
}

pub fn risky_chain() -> FiniteCmdp {
    FiniteCmdp {
        num_states: 3,
        num_actions: 2,
        transition: vec![
            vec![vec![0.0, 0.5, 0.5], vec![0.0, 1.0, 0.0]],
            vec![vec![0.0, 0.2, 0.8], vec![0.0, 0.5, 0.5]],
            vec![vec![0.0, 0.0, 1.0], vec![0.0, 0.0, 1.0]],
        ],
        task_cost: vec![vec![0.0, 1.0], vec![0.0, 1.0], vec![0.0, 0.0]],
        safety_cost: vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![0.0, 0.0]],
        gamma_c: 0.95,
        gamma_l: 1.0,
        budget_d: 1.0,
        horizon: 20,
        initial: vec![1.0, 0.0, 0.0],
    }
}

pub fn det_chain() -> FiniteCmdp {
    let n = 4;
    let mut transition = vec![vec![vec![0.0; n]; 2]; n];
    for (s, rows) in transition.iter_mut().enumerate() {
        for row in rows.iter_mut() {
            row[(s + 1).min(n - 1)] = 1.0;
        }
    }
    let live = |s: usize| s + 1 < n;
    FiniteCmdp {
        num_states: n,
        num_actions: 2,
        transition,
        task_cost: (0..n).map(|s| if live(s) { vec![0.0, (s + 1) as f64] } else { vec![0.0; 2] }).collect(),
        safety_cost: (0..n).map(|s| if live(s) { vec![1.0, 0.0] } else { vec![0.0; 2] }).collect(),
        gamma_c: 1.0,
        gamma_l: 1.0,
        budget_d: 1.0,
        horizon: 4,
        initial: vec![1.0, 0.0, 0.0, 0.0],
    }
}

pub fn tiny_random(seed_value: u64) -> FiniteCmdp {
    let mut rng = seed::stream(seed::derive(seed_value, &[0x7469_6e79]), seed::STREAM_ENV);
    let ns = rng.random_range(2..=5usize);
    let na = rng.random_range(2..=3usize);
    let mut transition = vec![vec![vec![0.0; ns]; na]; ns];
    let mut task_cost = vec![vec![0.0; na]; ns];
    let mut safety_cost = vec![vec![0.0; na]; ns];
    for s in 0..ns {
        for a in 0..na {
            transition[s][a][rng.random_range(0..ns)] = 1.0;
            task_cost[s][a] = rng.random_range(0.0..1.0);
            safety_cost[s][a] = rng.random_range(0..=2u32) as f64;
        }
    }
    let mut initial = vec![0.0; ns];
    initial[0] = 1.0;
    FiniteCmdp {
        num_states: ns,
        num_actions: na,
        transition,
        task_cost,
        safety_cost,
        gamma_c: if rng.random_bool(0.5) { 1.0 } else { 0.9 },
        gamma_l: 1.0,
        budget_d: rng.random_range(0..=4u32) as f64,
        horizon: rng.random_range(3..=6usize),
        initial,
    }
}
