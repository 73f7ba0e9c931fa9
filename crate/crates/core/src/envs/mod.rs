//! Built-in environments.

mod fixtures;
mod gridworld;
mod pendulum;
mod tabular;
pub mod toy;

pub use fixtures::{det_chain, make_fixture, risky_chain, tiny_random, FIXTURE_NAMES};
pub use gridworld::{Gridworld, GridworldParams, MOVES, TWO_CORRIDOR};
pub use pendulum::{
    pendulum_safety_cost, pendulum_step, pendulum_task_cost, safety_cost_with_delta, wrap_angle, PendulumEnv,
    PendulumParams, PendulumState,
};
pub use tabular::FiniteCmdpEnv;
