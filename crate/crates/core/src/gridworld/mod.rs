//! Deterministic MiniGrid-style gridworlds.
//!
//! Six discrete actions, sparse goal reward `1 − 0.9·steps/max_steps` with
//! `max_steps = 4·width·height`, lava ends the episode with reward 0.

mod env;
mod map;
mod model;
mod observe;
mod tasks;

use thiserror::Error;

pub use env::{Action, AgentPose, GridEnv, StepInfo, Transition};
pub use map::{AgentStart, CellKind, Heading, MapFile, MapSpec, TaskRef, MAP_SCHEMA_VERSION};
pub use model::{GridState, ModelStep, TransitionModel};
pub use observe::{ObsMode, Observation, VIEW};
pub use tasks::{builtin_task, TaskKind, MAX_TASK_SIZE, MIN_TASK_SIZE};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GridError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("could not parse map: {0}")]
    Parse(String),
    #[error("task size {size} outside supported range {min}..={max}")]
    UnsupportedSize { size: usize, min: usize, max: usize },
    #[error("action index {0} is not one of the 6 actions")]
    InvalidAction(usize),
    #[error("episode has finished; call reset first")]
    EpisodeFinished,
    #[error("cannot decode observation: {0}")]
    Decode(String),
    #[error("tabular model needs a fixed layout (randomize_layout = false)")]
    RandomizedModel,
}
