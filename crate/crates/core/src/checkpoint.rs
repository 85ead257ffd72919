//! Versioned JSON checkpoints. Floats are written as decimal strings so a
//! save, load, save cycle reproduces the file byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{GaitError, Result};
use crate::policy::{Architecture, PolicyParams};

pub const CHECKPOINT_VERSION: u32 = 1;

mod float_str {
    use super::*;

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&encode(*v))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        let s = String::deserialize(d)?;
        decode(&s).map_err(serde::de::Error::custom)
    }

    pub fn encode(v: f64) -> String {
        // LowerExp prints the shortest digits that parse back to the same bits
        format!("{v:e}")
    }

    pub fn decode(s: &str) -> std::result::Result<f64, String> {
        s.parse::<f64>().map_err(|e| format!("bad float {s:?}: {e}"))
    }
}

mod float_vec {
    use super::*;

    pub fn serialize<S: Serializer>(v: &[f64], s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|x| float_str::encode(*x)))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<f64>, D::Error> {
        Vec::<String>::deserialize(d)?
            .iter()
            .map(|s| float_str::decode(s).map_err(serde::de::Error::custom))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointStats {
    #[serde(with = "float_str")]
    pub mean_return: f64,
    #[serde(with = "float_str")]
    pub max_return: f64,
    #[serde(with = "float_str")]
    pub mean_episode_ticks: f64,
    #[serde(with = "float_str")]
    pub best_mean_return: f64,
}

impl Default for CheckpointStats {
    fn default() -> Self {
        Self {
            mean_return: f64::NAN,
            max_return: f64::NAN,
            mean_episode_ticks: f64::NAN,
            best_mean_return: f64::NEG_INFINITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub version: u32,
    pub arch: Architecture,
    #[serde(with = "float_vec")]
    pub params: Vec<f64>,
    /// Number of completed iterations.
    pub iteration: usize,
    pub seed: u64,
    pub stats: CheckpointStats,
}

impl Checkpoint {
    pub fn new(params: &PolicyParams, iteration: usize, seed: u64, stats: CheckpointStats) -> Self {
        Self {
            version: CHECKPOINT_VERSION,
            arch: params.arch().clone(),
            params: params.as_slice().to_vec(),
            iteration,
            seed,
            stats,
        }
    }

    pub fn policy(&self) -> Result<PolicyParams> {
        PolicyParams::new(self.arch.clone(), self.params.clone()).map_err(|e| GaitError::Checkpoint(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("checkpoint serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        // check the version before the full schema so old files get a clear message
        let probe: serde_json::Value =
            serde_json::from_str(text).map_err(|e| GaitError::Checkpoint(format!("malformed checkpoint: {e}")))?;
        match probe.get("version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(v) => {
                return Err(GaitError::Checkpoint(format!(
                    "unsupported checkpoint version {v}, expected {CHECKPOINT_VERSION}"
                )))
            }
            None => return Err(GaitError::Checkpoint("missing checkpoint version".into())),
        }
        let ck: Checkpoint =
            serde_json::from_value(probe).map_err(|e| GaitError::Checkpoint(format!("malformed checkpoint: {e}")))?;
        ck.policy()?;
        Ok(ck)
    }

    /// Write through a temporary file so an interrupted save never leaves a
    /// truncated checkpoint behind.
    pub fn save(&self, path: &Path) -> Result<()> {
        let tmp = path.with_extension("json.tmp");
        fs::write(&tmp, self.to_json())?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        Self::from_json(&text)
    }
}
