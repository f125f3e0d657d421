//! Observation encodings.

use serde::{Deserialize, Serialize};

use super::env::AgentPose;
use super::map::{CellKind, Heading};
use super::GridError;

/// Side of the egocentric view.
pub const VIEW: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ObsMode {
    /// 7×7×3 (object, colour, state) codes of the cells in front of the agent.
    PartialGrid,
    /// One-hot cell kinds for the whole map followed by the agent pose.
    FullOneHot,
    /// The agent's (x, y) cell.
    AgentXY,
}

impl ObsMode {
    /// Length of the encoded vector on a `width`×`height` map.
    pub fn len(self, width: usize, height: usize) -> usize {
        match self {
            ObsMode::PartialGrid => VIEW * VIEW * 3,
            ObsMode::FullOneHot => width * height * (CELL_CHANNELS + 1) + 4 + 1,
            ObsMode::AgentXY => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub mode: ObsMode,
    pub data: Vec<f64>,
}

const CELL_CHANNELS: usize = 7;

fn channel(cell: CellKind) -> usize {
    match cell {
        CellKind::Floor => 0,
        CellKind::Wall => 1,
        CellKind::Lava => 2,
        CellKind::Door { locked: true } => 3,
        CellKind::Door { locked: false } => 4,
        CellKind::Key => 5,
        CellKind::Goal => 6,
    }
}

const CHANNEL_KINDS: [CellKind; CELL_CHANNELS] = [
    CellKind::Floor,
    CellKind::Wall,
    CellKind::Lava,
    CellKind::Door { locked: true },
    CellKind::Door { locked: false },
    CellKind::Key,
    CellKind::Goal,
];

/// MiniGrid (object, colour, state) triple.
fn minigrid_code(cell: CellKind) -> [f64; 3] {
    match cell {
        CellKind::Floor => [1.0, 0.0, 0.0],
        CellKind::Wall => [2.0, 5.0, 0.0],
        CellKind::Door { locked: true } => [4.0, 4.0, 2.0],
        CellKind::Door { locked: false } => [4.0, 4.0, 0.0],
        CellKind::Key => [5.0, 4.0, 0.0],
        CellKind::Goal => [8.0, 1.0, 0.0],
        CellKind::Lava => [9.0, 0.0, 0.0],
    }
}

fn blocks_view(cell: CellKind) -> bool {
    matches!(cell, CellKind::Wall | CellKind::Door { locked: true })
}

pub(crate) fn encode(mode: ObsMode, cells: &[CellKind], width: usize, height: usize, pose: &AgentPose) -> Observation {
    let data = match mode {
        ObsMode::AgentXY => vec![pose.x as f64, pose.y as f64],
        ObsMode::FullOneHot => {
            let area = width * height;
            let mut data = vec![0.0; mode.len(width, height)];
            for (i, &cell) in cells.iter().enumerate() {
                data[i * CELL_CHANNELS + channel(cell)] = 1.0;
            }
            let base = area * CELL_CHANNELS;
            data[base + pose.y * width + pose.x] = 1.0;
            data[base + area + pose.heading.index()] = 1.0;
            data[base + area + 4] = f64::from(u8::from(pose.has_key));
            data
        }
        ObsMode::PartialGrid => partial_view(cells, width, height, pose),
    };
    Observation { mode, data }
}

/// The egocentric view: the agent sits at view cell (3, 6) looking towards
/// row 0. Cells off the map read as wall; cells hidden behind walls or
/// locked doors read as all zeros.
fn partial_view(cells: &[CellKind], width: usize, height: usize, pose: &AgentPose) -> Vec<f64> {
    let (fx, fy) = pose.heading.delta();
    let (rx, ry) = pose.heading.right().delta();
    let mut view = [[CellKind::Wall; VIEW]; VIEW];
    for (j, row) in view.iter_mut().enumerate() {
        for (i, slot) in row.iter_mut().enumerate() {
            let fwd = (VIEW - 1 - j) as i64;
            let side = i as i64 - (VIEW / 2) as i64;
            let wx = pose.x as i64 + fx as i64 * fwd + rx as i64 * side;
            let wy = pose.y as i64 + fy as i64 * fwd + ry as i64 * side;
            if (0..width as i64).contains(&wx) && (0..height as i64).contains(&wy) {
                *slot = cells[wy as usize * width + wx as usize];
            }
        }
    }
    let agent = (VIEW / 2, VIEW - 1);
    view[agent.1][agent.0] = if pose.has_key { CellKind::Key } else { CellKind::Floor };

    let mut visible = [[false; VIEW]; VIEW];
    visible[agent.1][agent.0] = true;
    for j in (0..VIEW).rev() {
        for i in 0..VIEW - 1 {
            if !visible[j][i] || blocks_view(view[j][i]) {
                continue;
            }
            visible[j][i + 1] = true;
            if j > 0 {
                visible[j - 1][i + 1] = true;
                visible[j - 1][i] = true;
            }
        }
        for i in (1..VIEW).rev() {
            if !visible[j][i] || blocks_view(view[j][i]) {
                continue;
            }
            visible[j][i - 1] = true;
            if j > 0 {
                visible[j - 1][i - 1] = true;
                visible[j - 1][i] = true;
            }
        }
    }

    let mut data = Vec::with_capacity(VIEW * VIEW * 3);
    for i in 0..VIEW {
        for j in 0..VIEW {
            let code = if visible[j][i] { minigrid_code(view[j][i]) } else { [0.0; 3] };
            data.extend_from_slice(&code);
        }
    }
    data
}

impl Observation {
    /// Recovers the map and pose from a [`ObsMode::FullOneHot`] encoding.
    pub fn decode_full(&self, width: usize, height: usize) -> Result<(Vec<CellKind>, AgentPose), GridError> {
        let bad = |why: &str| GridError::Decode(why.to_string());
        if self.mode != ObsMode::FullOneHot {
            return Err(bad("not a full one-hot observation"));
        }
        if self.data.len() != ObsMode::FullOneHot.len(width, height) {
            return Err(bad("length does not match the map size"));
        }
        let area = width * height;
        let one_hot = |slice: &[f64]| -> Option<usize> {
            let mut hot = slice.iter().enumerate().filter(|(_, &v)| v != 0.0);
            match (hot.next(), hot.next()) {
                (Some((i, &v)), None) if v == 1.0 => Some(i),
                _ => None,
            }
        };
        let cells = self.data[..area * CELL_CHANNELS]
            .chunks(CELL_CHANNELS)
            .map(|c| one_hot(c).map(|k| CHANNEL_KINDS[k]).ok_or_else(|| bad("cell is not one-hot")))
            .collect::<Result<Vec<_>, _>>()?;
        let base = area * CELL_CHANNELS;
        let at = one_hot(&self.data[base..base + area]).ok_or_else(|| bad("position is not one-hot"))?;
        let heading = one_hot(&self.data[base + area..base + area + 4]).ok_or_else(|| bad("heading is not one-hot"))?;
        let has_key = match self.data[base + area + 4] {
            0.0 => false,
            1.0 => true,
            _ => return Err(bad("key flag is not 0 or 1")),
        };
        let pose = AgentPose { x: at % width, y: at / width, heading: Heading::from_index(heading), has_key };
        Ok((cells, pose))
    }
}
