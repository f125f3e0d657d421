//! Value-conditional state entropy exploration.
//!
//! * [`entropy`]: kNN entropy estimators and the SE / VCSE / RCSE bonuses.
//! * [`gridworld`]: deterministic MiniGrid-style tasks and their exact tabular model.
//! * [`agent`]: actor-critic with a total critic and an extrinsic critic, plus
//!   dynamic-programming policy evaluation.
//! * [`trainer`]: rollout collection, bonus composition, updates and metrics.

pub mod entropy;
pub mod gridworld;
pub mod agent;
pub mod trainer;
