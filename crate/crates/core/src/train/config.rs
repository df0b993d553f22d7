use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::eval::MatchMode;
use crate::model::{Objective, DEFAULT_PAIR_CAP};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Hyperparameters as published.
    #[default]
    Paper,
    /// Small batches, small dimensions and a higher learning rate, sized for
    /// a single desktop core.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            other => Err(Error::Config(format!("unknown preset {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub warmup: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub k_max: usize,
    pub max_seq_len: usize,
    pub margin: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Embedding width of the lookup table. Ignored with external embeddings.
    pub dim: usize,
    pub d_out: usize,
    pub objective: Objective,
    pub pair_cap: usize,
    /// Matching mode for dev-set model selection.
    pub dev_match: MatchMode,
}

impl TrainConfig {
    pub fn preset(preset: Preset) -> Self {
        let paper = TrainConfig {
            lr: 5e-5,
            warmup: 0.1,
            batch_size: 64,
            epochs: 3,
            seed: 0,
            k_max: 5,
            max_seq_len: 512,
            margin: 1.0,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            dim: 128,
            d_out: 128,
            objective: Objective::Joint,
            pair_cap: DEFAULT_PAIR_CAP,
            dev_match: MatchMode::Exact,
        };
        match preset {
            Preset::Paper => paper,
            Preset::Desk => TrainConfig {
                lr: 2e-2,
                batch_size: 8,
                dim: 32,
                d_out: 32,
                ..paper
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if !(0.0..1.0).contains(&self.warmup) {
            return bad("warmup must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if self.k_max == 0 {
            return bad("k_max must be at least 1");
        }
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.max_seq_len == 0 {
            return bad("max_seq_len must be at least 1");
        }
        if self.dim == 0 || self.d_out == 0 {
            return bad("dim and d_out must be at least 1");
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) {
            return bad("lr must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) || self.adam_eps <= 0.0 {
            return bad("Adam requires 0 <= beta < 1 and eps > 0");
        }
        if self.pair_cap == 0 {
            return bad("pair_cap must be at least 1");
        }
        Ok(())
    }

    /// Apply flat `key = value` overrides. A `preset` key, if present, picks
    /// the base before any other key is applied.
    pub fn from_overrides(base: Preset, overrides: Map<String, Value>) -> Result<Self> {
        let preset = match overrides.get("preset") {
            Some(Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::Config(format!("preset must be a string, got {other}"))),
            None => base,
        };
        let Value::Object(mut merged) = serde_json::to_value(TrainConfig::preset(preset)).expect("config serializes")
        else {
            unreachable!("config serializes to an object")
        };
        for (k, v) in overrides {
            if k == "preset" {
                continue;
            }
            if !merged.contains_key(&k) {
                return Err(Error::Config(format!("unknown key {k:?}")));
            }
            merged.insert(k, v);
        }
        let cfg: TrainConfig =
            serde_json::from_value(Value::Object(merged)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a flat JSON object or TOML table.
    pub fn parse_flat(text: &str) -> Result<Map<String, Value>> {
        let value: Value = if text.trim_start().starts_with('{') {
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?
        } else {
            let table: toml::Table = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
            serde_json::to_value(table).map_err(|e| Error::Config(e.to_string()))?
        };
        match value {
            Value::Object(map) => {
                if let Some((k, _)) = map.iter().find(|(_, v)| v.is_object() || v.is_array()) {
                    return Err(Error::Config(format!("key {k:?} is not a scalar; config files are flat")));
                }
                Ok(map)
            }
            _ => Err(Error::Config("config must be a key-value object".into())),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_overrides(Preset::Paper, Self::parse_flat(&text)?)
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig::preset(Preset::Paper)
    }
}
