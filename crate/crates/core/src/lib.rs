//! Safety-augmented (Saute) Markov decision processes.
//!
//! A constrained MDP with a per-episode safety budget `d` is turned into an
//! ordinary MDP by tracking the remaining budget `z` as part of the state and
//! replacing the task cost with a constant penalty `n` once `z` turns
//! negative. This crate provides:
//!
//! - [`mdp`]: environment and policy traits, trajectories, return accounting
//! - [`saute`]: the safety-state wrapper around any [`mdp::Environment`]
//! - [`solver`]: tabular augmented MDPs, value iteration, brute-force oracles
//! - [`envs`]: pendulum swing-up, a correlated-cost gridworld and fixtures
//! - [`agents`]: CEM and random-shooting planners, tabular Q-learning and a
//!   Lagrangian baseline
//! - [`eval`]: seeded evaluation, box-plot statistics, experiment plans and
//!   result export

// `!(x >= 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod agents;
pub mod envs;
pub mod error;
pub mod eval;
pub mod mdp;
pub mod saute;
pub mod seed;
pub mod solver;

pub use error::{Error, Result};
pub use mdp::{Action, ActionSpace, CmdpSpec, Environment, Info, Policy, TrajectoryRecord};
pub use saute::{SauteConfig, SauteEnv, SauteState};

/// Engine version reported in manifests and over the bridge protocol.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
