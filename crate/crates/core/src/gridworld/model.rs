//! Exact tabular dynamics of a fixed map.

use std::collections::{HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use super::env::{apply_action, Action, AgentPose, Outcome};
use super::map::{CellKind, MapSpec};
use super::observe::{encode, ObsMode, Observation};
use super::GridError;

/// Everything that can change during an episode on a fixed map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridState {
    pub pose: AgentPose,
    /// Bit `i` set when the `i`-th door (row-major order) has been unlocked.
    pub doors_open: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ModelStep {
    Next { state: usize, reward: f64 },
    Terminal { reward: f64, reached_goal: bool },
}

impl ModelStep {
    pub fn reward(self) -> f64 {
        match self {
            ModelStep::Next { reward, .. } | ModelStep::Terminal { reward, .. } => reward,
        }
    }
}

/// Reachable non-terminal states and their successors under every action.
///
/// The goal pays `goal_reward` regardless of the episode clock, and
/// truncation is not modelled, so values are those of the discounted
/// infinite-horizon problem.
#[derive(Debug, Clone)]
pub struct TransitionModel {
    spec: MapSpec,
    doors: Vec<usize>,
    key: Option<usize>,
    states: Vec<GridState>,
    index: HashMap<GridState, usize>,
    next: Vec<[ModelStep; Action::COUNT]>,
}

impl TransitionModel {
    pub fn build(spec: &MapSpec, goal_reward: f64) -> Result<Self, GridError> {
        if spec.randomize_layout {
            return Err(GridError::RandomizedModel);
        }
        spec.validate()?;
        let doors: Vec<usize> =
            (0..spec.cells.len()).filter(|&i| matches!(spec.cells[i], CellKind::Door { .. })).collect();
        let initially_open =
            doors.iter().enumerate().fold(0u32, |m, (b, &i)| if spec.cells[i] == (CellKind::Door { locked: false }) { m | 1 << b } else { m });
        let key = spec.cells.iter().position(|&c| c == CellKind::Key);
        let mut model = Self { spec: spec.clone(), doors, key, states: Vec::new(), index: HashMap::new(), next: Vec::new() };

        let start = spec.agent_start;
        let s0 = GridState {
            pose: AgentPose { x: start.x, y: start.y, heading: start.heading, has_key: false },
            doors_open: initially_open,
        };
        model.intern(s0);
        let mut queue = VecDeque::from([0usize]);
        while let Some(s) = queue.pop_front() {
            let state = model.states[s];
            let mut row = [ModelStep::Terminal { reward: 0.0, reached_goal: false }; Action::COUNT];
            for action in Action::ALL {
                let mut cells = model.cells_for(&state);
                let mut pose = state.pose;
                row[action.index()] = match apply_action(&mut cells, spec.width, &mut pose, action) {
                    Outcome::Goal => ModelStep::Terminal { reward: goal_reward, reached_goal: true },
                    Outcome::Lava => ModelStep::Terminal { reward: 0.0, reached_goal: false },
                    Outcome::Continue => {
                        let doors_open = model.door_mask(&cells);
                        let before = model.states.len();
                        let id = model.intern(GridState { pose, doors_open });
                        if id == before {
                            queue.push_back(id);
                        }
                        ModelStep::Next { state: id, reward: 0.0 }
                    }
                };
            }
            model.next.push(row);
        }
        Ok(model)
    }

    fn intern(&mut self, state: GridState) -> usize {
        if let Some(&id) = self.index.get(&state) {
            return id;
        }
        let id = self.states.len();
        self.states.push(state);
        self.index.insert(state, id);
        id
    }

    fn door_mask(&self, cells: &[CellKind]) -> u32 {
        self.doors
            .iter()
            .enumerate()
            .fold(0, |m, (b, &i)| if cells[i] == (CellKind::Door { locked: false }) { m | 1 << b } else { m })
    }

    pub fn spec(&self) -> &MapSpec {
        &self.spec
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    /// The start state is always index 0.
    pub fn start(&self) -> usize {
        0
    }

    pub fn state(&self, id: usize) -> GridState {
        self.states[id]
    }

    pub fn states(&self) -> &[GridState] {
        &self.states
    }

    pub fn index_of(&self, state: &GridState) -> Option<usize> {
        self.index.get(state).copied()
    }

    /// Index of the state an environment is in, given its cells and pose.
    pub fn state_of(&self, cells: &[CellKind], pose: &AgentPose) -> Option<usize> {
        self.index_of(&GridState { pose: *pose, doors_open: self.door_mask(cells) })
    }

    pub fn step(&self, state: usize, action: Action) -> ModelStep {
        self.next[state][action.index()]
    }

    /// The map as it looks in `state`.
    pub fn cells_for(&self, state: &GridState) -> Vec<CellKind> {
        let mut cells = self.spec.cells.clone();
        for (b, &i) in self.doors.iter().enumerate() {
            cells[i] = CellKind::Door { locked: state.doors_open & (1 << b) == 0 };
        }
        if let (Some(k), true) = (self.key, state.pose.has_key) {
            cells[k] = CellKind::Floor;
        }
        cells
    }

    pub fn observe(&self, state: usize, mode: ObsMode) -> Observation {
        let s = &self.states[state];
        encode(mode, &self.cells_for(s), self.spec.width, self.spec.height, &s.pose)
    }
}
