//! Builtin task layouts modelled on the MiniGrid families.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::map::{AgentStart, CellKind, Heading, MapSpec, TaskRef};
use super::GridError;

pub const MIN_TASK_SIZE: usize = 6;
pub const MAX_TASK_SIZE: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    /// Open room, goal in the far corner.
    Empty,
    /// A lava column crossed by one gap.
    LavaGap,
    /// One interior wall with a single opening, always the same layout.
    SimpleCrossingFixed,
    /// One interior wall with a single opening, redrawn every episode.
    SimpleCrossingRandom,
    /// Fetch the key, unlock the door, reach the goal in the next room.
    DoorKey,
    /// Fetch the key and unlock the door; the goal sits right behind it.
    Unlock,
}

impl TaskKind {
    pub const ALL: [TaskKind; 6] = [
        TaskKind::Empty,
        TaskKind::LavaGap,
        TaskKind::SimpleCrossingFixed,
        TaskKind::SimpleCrossingRandom,
        TaskKind::DoorKey,
        TaskKind::Unlock,
    ];

    /// Whether [`builtin_task`] redraws this layout on each reset.
    pub fn randomized_by_default(self) -> bool {
        !matches!(self, TaskKind::Empty | TaskKind::SimpleCrossingFixed)
    }
}

/// The named task at `size`×`size`. The stored cells are the layout for
/// seed 0; randomized tasks redraw it from the episode seed on reset.
pub fn builtin_task(name: TaskKind, size: usize) -> Result<MapSpec, GridError> {
    let (cells, agent_start) = generate(name, size, 0)?;
    let spec = MapSpec {
        width: size,
        height: size,
        cells,
        agent_start,
        randomize_layout: name.randomized_by_default(),
        seed: 0,
        task: Some(TaskRef { name, size }),
    };
    spec.validate()?;
    Ok(spec)
}

struct Canvas {
    size: usize,
    cells: Vec<CellKind>,
}

impl Canvas {
    fn walled(size: usize) -> Self {
        let mut cells = vec![CellKind::Floor; size * size];
        for i in 0..size {
            for (x, y) in [(i, 0), (i, size - 1), (0, i), (size - 1, i)] {
                cells[y * size + x] = CellKind::Wall;
            }
        }
        Self { size, cells }
    }

    fn set(&mut self, x: usize, y: usize, kind: CellKind) {
        self.cells[y * self.size + x] = kind;
    }

    fn vertical(&mut self, x: usize, kind: CellKind) {
        for y in 1..self.size - 1 {
            self.set(x, y, kind);
        }
    }

    fn horizontal(&mut self, y: usize, kind: CellKind) {
        for x in 1..self.size - 1 {
            self.set(x, y, kind);
        }
    }
}

fn random_heading(rng: &mut ChaCha8Rng) -> Heading {
    Heading::from_index(rng.random_range(0..4))
}

/// Layout and start pose of `name` drawn with `seed`.
pub(crate) fn generate(name: TaskKind, size: usize, seed: u64) -> Result<(Vec<CellKind>, AgentStart), GridError> {
    if !(MIN_TASK_SIZE..=MAX_TASK_SIZE).contains(&size) {
        return Err(GridError::UnsupportedSize { size, min: MIN_TASK_SIZE, max: MAX_TASK_SIZE });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut c = Canvas::walled(size);
    let far = size - 2;
    let corner = AgentStart { x: 1, y: 1, heading: Heading::East };
    let start = match name {
        TaskKind::Empty => corner,
        TaskKind::LavaGap => {
            let x = rng.random_range(2..size - 2);
            let gap = rng.random_range(1..size - 1);
            c.vertical(x, CellKind::Lava);
            c.set(x, gap, CellKind::Floor);
            corner
        }
        TaskKind::SimpleCrossingFixed => {
            c.vertical(size / 2, CellKind::Wall);
            c.set(size / 2, size - 3, CellKind::Floor);
            corner
        }
        TaskKind::SimpleCrossingRandom => {
            let pos = 2 * rng.random_range(1..(size - 1) / 2);
            let opening = rng.random_range(1..size - 1);
            if rng.random_bool(0.5) {
                c.vertical(pos, CellKind::Wall);
                c.set(pos, opening, CellKind::Floor);
            } else {
                c.horizontal(pos, CellKind::Wall);
                c.set(opening, pos, CellKind::Floor);
            }
            corner
        }
        TaskKind::DoorKey | TaskKind::Unlock => {
            let split = rng.random_range(2..size - 2);
            let door_y = rng.random_range(1..size - 1);
            c.vertical(split, CellKind::Wall);
            c.set(split, door_y, CellKind::Door { locked: true });
            let left: Vec<(usize, usize)> = (1..split).flat_map(|x| (1..size - 1).map(move |y| (x, y))).collect();
            let a = rng.random_range(0..left.len());
            let mut k = rng.random_range(0..left.len() - 1);
            if k >= a {
                k += 1;
            }
            c.set(left[k].0, left[k].1, CellKind::Key);
            if name == TaskKind::Unlock {
                c.set(split + 1, door_y, CellKind::Goal);
            }
            AgentStart { x: left[a].0, y: left[a].1, heading: random_heading(&mut rng) }
        }
    };
    if name != TaskKind::Unlock {
        c.set(far, far, CellKind::Goal);
    }
    Ok((c.cells, start))
}
