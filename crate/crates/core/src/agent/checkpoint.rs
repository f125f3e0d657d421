//! JSON checkpoints with a config fingerprint.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::mlp::Mlp;
use super::tabular::{self, Table, TableDump, ENTRY};
use super::{Agent, AgentConfig, AgentError, OptimState, Params};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Hex SHA-256 of the config's JSON form.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let bytes = serde_json::to_vec(config).expect("config serializes");
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum ParamDump {
    Mlp(Mlp),
    Tabular(TableDump),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum OptimDump {
    None,
    Dense(Vec<f64>),
    Sparse(TableDump),
}

/// Everything needed to restore an [`Agent`] bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    format_version: u32,
    config_hash: String,
    config: AgentConfig,
    obs_dim: usize,
    params: ParamDump,
    optimizer: OptimDump,
}

fn sparse_dump(map: &HashMap<tabular::Key, [f64; ENTRY]>) -> TableDump {
    Table { entries: map.clone() }.dump()
}

impl Agent {
    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format_version: CHECKPOINT_VERSION,
            config_hash: config_hash(&self.config),
            config: self.config.clone(),
            obs_dim: self.obs_dim,
            params: match &self.params {
                Params::Mlp(m) => ParamDump::Mlp(m.clone()),
                Params::Tabular(t) => ParamDump::Tabular(t.dump()),
            },
            optimizer: match &self.optim {
                OptimState::None => OptimDump::None,
                OptimState::Dense(v) => OptimDump::Dense(v.clone()),
                OptimState::Sparse(m) => OptimDump::Sparse(sparse_dump(m)),
            },
        }
    }

    pub fn to_checkpoint_json(&self) -> String {
        serde_json::to_string(&self.checkpoint()).expect("checkpoint serializes")
    }

    pub fn from_checkpoint_json(text: &str) -> Result<Self, AgentError> {
        let ck: Checkpoint = serde_json::from_str(text).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(ck)
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self, AgentError> {
        let fail = |m: &str| Err(AgentError::Checkpoint(m.to_string()));
        if ck.format_version != CHECKPOINT_VERSION {
            return fail("unsupported checkpoint format_version");
        }
        if config_hash(&ck.config) != ck.config_hash {
            return fail("config hash does not match the stored config");
        }
        let mut agent = Agent::zeroed(ck.config, ck.obs_dim)?;
        agent.params = match (agent.params, ck.params) {
            (Params::Mlp(fresh), ParamDump::Mlp(m)) => {
                if m.input_dim() != fresh.input_dim() || m.num_params() != fresh.num_params() || m.theta.len() != fresh.num_params() {
                    return fail("network shape does not match the config");
                }
                Params::Mlp(m)
            }
            (Params::Tabular(_), ParamDump::Tabular(d)) => Params::Tabular(Table::from_dump(&d)),
            _ => return fail("parameter kind does not match the config"),
        };
        agent.optim = match (agent.optim, ck.optimizer) {
            (OptimState::None, OptimDump::None) => OptimState::None,
            (OptimState::Dense(v), OptimDump::Dense(d)) if v.len() == d.len() => OptimState::Dense(d),
            (OptimState::Sparse(_), OptimDump::Sparse(d)) => OptimState::Sparse(Table::from_dump(&d).entries),
            _ => return fail("optimizer state does not match the config"),
        };
        Ok(agent)
    }
}
