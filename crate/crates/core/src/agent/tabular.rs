//! Lookup-table approximator keyed on the exact observation.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::{PolicyOutput, NUM_ACTIONS};

/// Six logits, then the total and extrinsic values.
pub(crate) const ENTRY: usize = NUM_ACTIONS + 2;

pub(crate) type Key = Vec<u64>;

pub(crate) fn key(obs: &[f64]) -> Key {
    obs.iter().map(|v| v.to_bits()).collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct Table {
    pub(crate) entries: HashMap<Key, [f64; ENTRY]>,
}

/// Serialized form; entries sorted by key so dumps are reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub(crate) struct TableDump {
    pub(crate) keys: Vec<Vec<f64>>,
    pub(crate) entries: Vec<[f64; ENTRY]>,
}

impl Table {
    pub(crate) fn get(&self, obs: &[f64]) -> [f64; ENTRY] {
        self.entries.get(&key(obs)).copied().unwrap_or([0.0; ENTRY])
    }

    pub(crate) fn forward(&self, obs: &[f64]) -> PolicyOutput {
        let e = self.get(obs);
        let mut action_logits = [0.0; NUM_ACTIONS];
        action_logits.copy_from_slice(&e[..NUM_ACTIONS]);
        PolicyOutput { action_logits, v_total: e[NUM_ACTIONS], v_ext: e[NUM_ACTIONS + 1] }
    }

    pub(crate) fn dump(&self) -> TableDump {
        let mut items: Vec<(&Key, &[f64; ENTRY])> = self.entries.iter().collect();
        items.sort_by(|a, b| a.0.cmp(b.0));
        TableDump {
            keys: items.iter().map(|(k, _)| k.iter().map(|&b| f64::from_bits(b)).collect()).collect(),
            entries: items.iter().map(|(_, e)| **e).collect(),
        }
    }

    pub(crate) fn from_dump(dump: &TableDump) -> Self {
        Self { entries: dump.keys.iter().map(|k| key(k)).zip(dump.entries.iter().copied()).collect() }
    }
}
