//! Flat JSON run configuration with dotted keys. Flags override file
//! values; unknown keys are rejected; every numeric parameter is
//! range-checked at parse time.

use anyhow::{bail, Context, Result};
use serde_json::Value;
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, Value>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(ConfigFile::default());
        };
        let bytes = std::fs::read(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let parsed: Value = serde_json::from_slice(&bytes)
            .with_context(|| format!("parsing config {}", path.display()))?;
        let Value::Object(map) = parsed else {
            bail!("config must be a flat JSON object with dotted keys");
        };
        let mut values = BTreeMap::new();
        for (k, v) in map {
            if v.is_object() || v.is_array() {
                bail!("config key '{k}' must be a scalar (flat dotted-key schema)");
            }
            values.insert(k, v);
        }
        Ok(ConfigFile { values })
    }

    /// Reject keys outside the command's vocabulary.
    pub fn check_known(&self, known: &[&str]) -> Result<()> {
        for key in self.values.keys() {
            if !known.contains(&key.as_str()) {
                bail!("unknown config key '{key}' (known: {})", known.join(", "));
            }
        }
        Ok(())
    }

    pub fn echo(&self) -> BTreeMap<String, Value> {
        self.values.clone()
    }

    /// Resolve a numeric parameter: flag value wins, then config, then the
    /// default; the result must lie in `[lo, hi]`.
    pub fn number(
        &self,
        key: &str,
        flag: Option<f64>,
        default: f64,
        lo: f64,
        hi: f64,
    ) -> Result<f64> {
        let v = if let Some(f) = flag {
            f
        } else if let Some(v) = self.values.get(key) {
            v.as_f64().with_context(|| format!("config key '{key}' must be a number"))?
        } else {
            default
        };
        if !(v >= lo && v <= hi) {
            bail!("parameter '{key}' = {v} outside [{lo}, {hi}]");
        }
        Ok(v)
    }

    pub fn integer(
        &self,
        key: &str,
        flag: Option<usize>,
        default: usize,
        lo: usize,
        hi: usize,
    ) -> Result<usize> {
        let v = if let Some(f) = flag {
            f
        } else if let Some(v) = self.values.get(key) {
            v.as_u64().with_context(|| format!("config key '{key}' must be an integer"))?
                as usize
        } else {
            default
        };
        if !(v >= lo && v <= hi) {
            bail!("parameter '{key}' = {v} outside [{lo}, {hi}]");
        }
        Ok(v)
    }
}
