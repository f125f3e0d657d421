//! Episode dynamics.

use serde::{Deserialize, Serialize};

use super::map::{CellKind, Heading, MapSpec};
use super::observe::{encode, ObsMode, Observation};
use super::GridError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Action {
    TurnLeft,
    TurnRight,
    Forward,
    Pickup,
    Toggle,
    Done,
}

impl Action {
    pub const COUNT: usize = 6;
    pub const ALL: [Action; 6] =
        [Action::TurnLeft, Action::TurnRight, Action::Forward, Action::Pickup, Action::Toggle, Action::Done];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Result<Self, GridError> {
        Self::ALL.get(i).copied().ok_or(GridError::InvalidAction(i))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentPose {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
    pub has_key: bool,
}

impl AgentPose {
    pub fn front(&self) -> (usize, usize) {
        let (dx, dy) = self.heading.delta();
        ((self.x as i64 + dx as i64) as usize, (self.y as i64 + dy as i64) as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepInfo {
    /// Pose after the step.
    pub pose: AgentPose,
    /// Steps used in the episode, including this one.
    pub step_index: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub obs: Observation,
    pub action: Action,
    pub next_obs: Observation,
    pub extrinsic_reward: f64,
    /// Reached the goal or stepped into lava.
    pub terminated: bool,
    /// Ran out of steps without terminating.
    pub truncated: bool,
    pub reached_goal: bool,
    pub info: StepInfo,
}

/// What a single action does to a (cells, pose) pair, clock aside.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Continue,
    Goal,
    Lava,
}

/// Applies `action` in place. Shared by [`GridEnv::step`] and the tabular model.
pub(crate) fn apply_action(cells: &mut [CellKind], width: usize, pose: &mut AgentPose, action: Action) -> Outcome {
    let (fx, fy) = pose.front();
    let front = fx + fy * width;
    match action {
        Action::TurnLeft => pose.heading = pose.heading.left(),
        Action::TurnRight => pose.heading = pose.heading.right(),
        Action::Forward => {
            let cell = cells[front];
            if cell.passable() {
                pose.x = fx;
                pose.y = fy;
                match cell {
                    CellKind::Goal => return Outcome::Goal,
                    CellKind::Lava => return Outcome::Lava,
                    _ => {}
                }
            }
        }
        Action::Pickup => {
            if cells[front] == CellKind::Key && !pose.has_key {
                pose.has_key = true;
                cells[front] = CellKind::Floor;
            }
        }
        Action::Toggle => {
            if cells[front] == (CellKind::Door { locked: true }) && pose.has_key {
                cells[front] = CellKind::Door { locked: false };
            }
        }
        Action::Done => {}
    }
    Outcome::Continue
}

/// One gridworld instance. Owns its mutable episode state.
#[derive(Debug, Clone)]
pub struct GridEnv {
    spec: MapSpec,
    mode: ObsMode,
    cells: Vec<CellKind>,
    pose: AgentPose,
    steps: u32,
    max_steps: u32,
    finished: bool,
}

impl GridEnv {
    pub fn new(spec: MapSpec, mode: ObsMode) -> Result<Self, GridError> {
        spec.validate()?;
        let pose = AgentPose { x: spec.agent_start.x, y: spec.agent_start.y, heading: spec.agent_start.heading, has_key: false };
        Ok(Self {
            cells: spec.cells.clone(),
            max_steps: spec.max_steps(),
            pose,
            steps: 0,
            finished: true,
            mode,
            spec,
        })
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn mode(&self) -> ObsMode {
        self.mode
    }

    pub fn pose(&self) -> AgentPose {
        self.pose
    }

    pub fn cells(&self) -> &[CellKind] {
        &self.cells
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn max_steps(&self) -> u32 {
        self.max_steps
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    /// Starts an episode. Fixed layouts ignore `seed`; randomized ones draw
    /// their layout from it.
    pub fn reset(&mut self, seed: u64) -> Result<Observation, GridError> {
        let (cells, start) = self.spec.layout_for(seed)?;
        self.cells = cells;
        self.pose = AgentPose { x: start.x, y: start.y, heading: start.heading, has_key: false };
        self.steps = 0;
        self.finished = false;
        Ok(self.observe())
    }

    pub fn observe(&self) -> Observation {
        self.observe_as(self.mode)
    }

    pub fn observe_as(&self, mode: ObsMode) -> Observation {
        encode(mode, &self.cells, self.spec.width, self.spec.height, &self.pose)
    }

    pub fn step(&mut self, action: Action) -> Result<Transition, GridError> {
        if self.finished {
            return Err(GridError::EpisodeFinished);
        }
        let obs = self.observe();
        self.steps += 1;
        let outcome = apply_action(&mut self.cells, self.spec.width, &mut self.pose, action);
        let reached_goal = outcome == Outcome::Goal;
        let terminated = outcome != Outcome::Continue;
        let truncated = !terminated && self.steps >= self.max_steps;
        let extrinsic_reward =
            if reached_goal { 1.0 - 0.9 * f64::from(self.steps) / f64::from(self.max_steps) } else { 0.0 };
        self.finished = terminated || truncated;
        Ok(Transition {
            obs,
            action,
            next_obs: self.observe(),
            extrinsic_reward,
            terminated,
            truncated,
            reached_goal,
            info: StepInfo { pose: self.pose, step_index: self.steps },
        })
    }
}
