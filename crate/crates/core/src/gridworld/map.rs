//! Map layouts and their JSON representation.

use serde::{Deserialize, Serialize};

use super::tasks::{self, TaskKind};
use super::GridError;

/// Version written to and required from map JSON files.
pub const MAP_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellKind {
    Floor,
    Wall,
    Lava,
    /// An unlocked door is open and passable.
    Door { locked: bool },
    Key,
    Goal,
}

impl CellKind {
    /// Whether the agent may move onto the cell.
    pub fn passable(self) -> bool {
        matches!(self, CellKind::Floor | CellKind::Lava | CellKind::Goal | CellKind::Door { locked: false })
    }

    fn to_char(self) -> char {
        match self {
            CellKind::Floor => '.',
            CellKind::Wall => '#',
            CellKind::Lava => 'L',
            CellKind::Door { locked: true } => 'D',
            CellKind::Door { locked: false } => 'd',
            CellKind::Key => 'K',
            CellKind::Goal => 'G',
        }
    }

    fn from_char(c: char) -> Option<Self> {
        Some(match c {
            '.' => CellKind::Floor,
            '#' => CellKind::Wall,
            'L' => CellKind::Lava,
            'D' => CellKind::Door { locked: true },
            'd' => CellKind::Door { locked: false },
            'K' => CellKind::Key,
            'G' => CellKind::Goal,
            _ => return None,
        })
    }
}

/// Facing direction; y grows downward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Heading {
    #[serde(rename = "N")]
    North,
    #[serde(rename = "E")]
    East,
    #[serde(rename = "S")]
    South,
    #[serde(rename = "W")]
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Self {
        Self::ALL[i % 4]
    }

    pub fn delta(self) -> (i32, i32) {
        match self {
            Heading::North => (0, -1),
            Heading::East => (1, 0),
            Heading::South => (0, 1),
            Heading::West => (-1, 0),
        }
    }

    pub fn left(self) -> Self {
        Self::from_index(self.index() + 3)
    }

    pub fn right(self) -> Self {
        Self::from_index(self.index() + 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AgentStart {
    pub x: usize,
    pub y: usize,
    pub heading: Heading,
}

/// Which builtin generator a spec came from, used to redraw layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRef {
    pub name: TaskKind,
    pub size: usize,
}

/// A grid layout plus the agent's start pose.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MapSpec {
    pub width: usize,
    pub height: usize,
    /// Row-major, `cells[y * width + x]`.
    pub cells: Vec<CellKind>,
    pub agent_start: AgentStart,
    /// Redraw the layout from the task generator on every reset.
    pub randomize_layout: bool,
    pub seed: u64,
    pub task: Option<TaskRef>,
}

impl MapSpec {
    pub fn cell(&self, x: usize, y: usize) -> CellKind {
        self.cells[y * self.width + x]
    }

    pub fn max_steps(&self) -> u32 {
        (4 * self.width * self.height) as u32
    }

    /// Builds a spec from text rows (see [`CellKind`] characters).
    pub fn from_rows(rows: &[&str], agent_start: AgentStart) -> Result<Self, GridError> {
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        let mut cells = Vec::with_capacity(width * height);
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(GridError::InvalidMap(format!("row {y} has {} cells, expected {width}", row.chars().count())));
            }
            for (x, c) in row.chars().enumerate() {
                cells.push(CellKind::from_char(c).ok_or_else(|| {
                    GridError::InvalidMap(format!("unknown cell character {c:?} at ({x}, {y})"))
                })?);
            }
        }
        let spec = Self { width, height, cells, agent_start, randomize_layout: false, seed: 0, task: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn rows(&self) -> Vec<String> {
        self.cells.chunks(self.width).map(|row| row.iter().map(|c| c.to_char()).collect()).collect()
    }

    pub fn validate(&self) -> Result<(), GridError> {
        let (w, h) = (self.width, self.height);
        if w < 3 || h < 3 {
            return Err(GridError::InvalidMap(format!("map {w}x{h} is smaller than 3x3")));
        }
        if self.cells.len() != w * h {
            return Err(GridError::InvalidMap(format!("{} cells for a {w}x{h} map", self.cells.len())));
        }
        for y in 0..h {
            for x in 0..w {
                let border = x == 0 || y == 0 || x == w - 1 || y == h - 1;
                if border && self.cell(x, y) != CellKind::Wall {
                    return Err(GridError::InvalidMap(format!("border cell ({x}, {y}) is not a wall")));
                }
            }
        }
        let goals = self.cells.iter().filter(|&&c| c == CellKind::Goal).count();
        if goals != 1 {
            return Err(GridError::InvalidMap(format!("expected exactly one goal, found {goals}")));
        }
        let keys = self.cells.iter().filter(|&&c| c == CellKind::Key).count();
        if keys > 1 {
            return Err(GridError::InvalidMap(format!("at most one key is supported, found {keys}")));
        }
        let doors = self.cells.iter().filter(|c| matches!(c, CellKind::Door { .. })).count();
        if doors > 32 {
            return Err(GridError::InvalidMap(format!("at most 32 doors are supported, found {doors}")));
        }
        let AgentStart { x, y, .. } = self.agent_start;
        if x >= w || y >= h || self.cell(x, y) != CellKind::Floor {
            return Err(GridError::InvalidMap(format!("agent start ({x}, {y}) is not a floor cell")));
        }
        if self.randomize_layout && self.task.is_none() {
            return Err(GridError::InvalidMap("randomize_layout needs a task generator".into()));
        }
        Ok(())
    }

    /// Layout used for an episode started with `seed`.
    pub(crate) fn layout_for(&self, seed: u64) -> Result<(Vec<CellKind>, AgentStart), GridError> {
        match (self.randomize_layout, self.task) {
            (true, Some(task)) => {
                let (cells, start) = tasks::generate(task.name, task.size, seed)?;
                Ok((cells, start))
            }
            _ => Ok((self.cells.clone(), self.agent_start)),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&MapFile::from(self)).expect("map serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, GridError> {
        let file: MapFile = serde_json::from_str(text).map_err(|e| GridError::Parse(e.to_string()))?;
        Self::try_from(file)
    }
}

/// On-disk form of a [`MapSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub schema_version: u32,
    pub rows: Vec<String>,
    pub agent_start: AgentStart,
    #[serde(default)]
    pub randomize_layout: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub task: Option<TaskRef>,
}

impl From<&MapSpec> for MapFile {
    fn from(spec: &MapSpec) -> Self {
        Self {
            schema_version: MAP_SCHEMA_VERSION,
            rows: spec.rows(),
            agent_start: spec.agent_start,
            randomize_layout: spec.randomize_layout,
            seed: spec.seed,
            task: spec.task,
        }
    }
}

impl TryFrom<MapFile> for MapSpec {
    type Error = GridError;

    fn try_from(file: MapFile) -> Result<Self, GridError> {
        if file.schema_version != MAP_SCHEMA_VERSION {
            return Err(GridError::Parse(format!(
                "unsupported map schema_version {} (expected {MAP_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        let rows: Vec<&str> = file.rows.iter().map(String::as_str).collect();
        let mut spec = MapSpec::from_rows(&rows, file.agent_start)?;
        spec.randomize_layout = file.randomize_layout;
        spec.seed = file.seed;
        spec.task = file.task;
        spec.validate()?;
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn start() -> AgentStart {
        AgentStart { x: 1, y: 1, heading: Heading::East }
    }

    #[test]
    fn rejects_missing_goal() {
        let err = MapSpec::from_rows(&["#####", "#...#", "#...#", "#####"], start()).unwrap_err();
        assert!(matches!(err, GridError::InvalidMap(m) if m.contains("goal")));
    }

    #[test]
    fn rejects_open_border_and_bad_start() {
        assert!(MapSpec::from_rows(&["#####", "#..G.", "#####"], start()).is_err());
        let s = AgentStart { x: 3, y: 1, heading: Heading::East };
        assert!(MapSpec::from_rows(&["#####", "#..G#", "#####"], s).is_err());
    }

    #[test]
    fn json_round_trip() {
        let spec = MapSpec::from_rows(&["######", "#..K.#", "#.#D##", "#...G#", "######"], start()).unwrap();
        let back = MapSpec::from_json(&spec.to_json()).unwrap();
        assert_eq!(spec, back);
        assert!(spec.to_json().contains("\"schema_version\": 1"));
    }

    #[test]
    fn json_rejects_other_schema_versions() {
        let spec = MapSpec::from_rows(&["####", "#.G#", "####"], start()).unwrap();
        let text = spec.to_json().replace("\"schema_version\": 1", "\"schema_version\": 7");
        assert!(matches!(MapSpec::from_json(&text), Err(GridError::Parse(_))));
    }

    #[test]
    fn headings_rotate() {
        assert_eq!(Heading::North.left(), Heading::West);
        assert_eq!(Heading::West.right(), Heading::North);
        assert_eq!(Heading::East.right().right(), Heading::West);
    }
}
