//! Planners, the tabular learner and the Lagrangian baseline.

mod cem;
mod lagrangian;
mod qlearn;
mod shooting;

pub use cem::{cem_plan, CemPlanConfig, CemPlanner, PlanResult};
pub use lagrangian::{
    best_response, lagrangian_update, train_lagrangian, LagrangianConfig, LagrangianOutcome, LagrangianState,
    TimeIndexedPolicy, LAMBDA_CAP,
};
pub use qlearn::{tabular_q_learn, QLearnConfig, Schedule, TabularPolicy};
pub use shooting::{random_shooting_plan, ShootingPlanner};
