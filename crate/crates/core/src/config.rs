//! Run configuration: defaults, a JSON file on top, command-line flags on top
//! of that. Keys are dotted (`mod.hgrid`); the file may use either the flat
//! dotted form or nested objects.

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {reason}")]
    Read { path: String, reason: String },
    #[error("unknown config key '{0}'; valid keys: {keys}", keys = Config::KEYS.join(", "))]
    UnknownKey(String),
    #[error("config key '{key}' expects {expected}, got {got}")]
    BadValue { key: String, expected: &'static str, got: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub quad_panels: usize,
    pub mod_hgrid: usize,
    pub mod_xgrid: usize,
    pub mod_kernel_depth: u32,
    pub approx_iters: usize,
    pub approx_restarts: usize,
    pub approx_seed: u64,
    pub campaign_cases: usize,
    pub campaign_rho: f64,
    pub campaign_window: f64,
    pub campaign_threshold: f64,
    pub campaign_n_max: usize,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            quad_panels: 64,
            mod_hgrid: 24,
            mod_xgrid: 1024,
            mod_kernel_depth: crate::moduli::DEFAULT_KERNEL_DEPTH,
            approx_iters: 200,
            approx_restarts: 5,
            approx_seed: 0,
            campaign_cases: 216,
            campaign_rho: 0.05,
            campaign_window: 2.0,
            campaign_threshold: 1.0,
            campaign_n_max: 12,
        }
    }
}

fn as_usize(key: &str, v: &Value) -> Result<usize, ConfigError> {
    v.as_u64().map(|x| x as usize).ok_or_else(|| ConfigError::BadValue { key: key.into(), expected: "a nonnegative integer", got: v.to_string() })
}

fn as_f64(key: &str, v: &Value) -> Result<f64, ConfigError> {
    v.as_f64().filter(|x| x.is_finite()).ok_or_else(|| ConfigError::BadValue { key: key.into(), expected: "a finite number", got: v.to_string() })
}

fn flatten(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(m) => {
            for (k, v) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        _ => {
            out.insert(prefix.to_string(), v.clone());
        }
    }
}

impl Config {
    pub const KEYS: [&'static str; 12] = [
        "quad.panels",
        "mod.hgrid",
        "mod.xgrid",
        "mod.kernel_depth",
        "approx.iters",
        "approx.restarts",
        "approx.seed",
        "campaign.cases",
        "campaign.rho",
        "campaign.window",
        "campaign.threshold",
        "campaign.n_max",
    ];

    pub fn set(&mut self, key: &str, v: &Value) -> Result<(), ConfigError> {
        match key {
            "quad.panels" => self.quad_panels = as_usize(key, v)?,
            "mod.hgrid" => self.mod_hgrid = as_usize(key, v)?,
            "mod.xgrid" => self.mod_xgrid = as_usize(key, v)?,
            "mod.kernel_depth" => self.mod_kernel_depth = as_usize(key, v)? as u32,
            "approx.iters" => self.approx_iters = as_usize(key, v)?,
            "approx.restarts" => self.approx_restarts = as_usize(key, v)?,
            "approx.seed" => self.approx_seed = as_usize(key, v)? as u64,
            "campaign.cases" => self.campaign_cases = as_usize(key, v)?,
            "campaign.rho" => self.campaign_rho = as_f64(key, v)?,
            "campaign.window" => self.campaign_window = as_f64(key, v)?,
            "campaign.threshold" => self.campaign_threshold = as_f64(key, v)?,
            "campaign.n_max" => self.campaign_n_max = as_usize(key, v)?,
            _ => return Err(ConfigError::UnknownKey(key.to_string())),
        }
        Ok(())
    }

    /// Applies every key of a JSON document.
    pub fn merge_json(&mut self, text: &str, origin: &str) -> Result<(), ConfigError> {
        let v: Value = serde_json::from_str(text).map_err(|e| ConfigError::Read { path: origin.into(), reason: e.to_string() })?;
        if !v.is_object() {
            return Err(ConfigError::Read { path: origin.into(), reason: "top level must be an object".into() });
        }
        let mut flat = BTreeMap::new();
        flatten("", &v, &mut flat);
        for (k, v) in &flat {
            self.set(k, v)?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read { path: origin.clone(), reason: e.to_string() })?;
        self.merge_json(&text, &origin)
    }

    /// `key = value` lines in key order, for report headers.
    pub fn echo(&self) -> Vec<String> {
        let vals: [String; 12] = [
            self.quad_panels.to_string(),
            self.mod_hgrid.to_string(),
            self.mod_xgrid.to_string(),
            self.mod_kernel_depth.to_string(),
            self.approx_iters.to_string(),
            self.approx_restarts.to_string(),
            self.approx_seed.to_string(),
            self.campaign_cases.to_string(),
            self.campaign_rho.to_string(),
            self.campaign_window.to_string(),
            self.campaign_threshold.to_string(),
            self.campaign_n_max.to_string(),
        ];
        Self::KEYS.iter().zip(vals).map(|(k, v)| format!("{k} = {v}")).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_and_dotted_forms_agree() {
        let mut a = Config::default();
        a.merge_json(r#"{"mod": {"hgrid": 30}, "quad": {"panels": 128}}"#, "a").unwrap();
        let mut b = Config::default();
        b.merge_json(r#"{"mod.hgrid": 30, "quad.panels": 128}"#, "b").unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mod_hgrid, 30);
        assert_eq!(a.mod_xgrid, Config::default().mod_xgrid);
    }

    #[test]
    fn unknown_keys_and_bad_values_are_rejected() {
        let mut c = Config::default();
        assert!(matches!(c.merge_json(r#"{"mod.hgird": 3}"#, "x"), Err(ConfigError::UnknownKey(_))));
        assert!(matches!(c.merge_json(r#"{"mod.hgrid": -3}"#, "x"), Err(ConfigError::BadValue { .. })));
        assert!(matches!(c.merge_json("[1]", "x"), Err(ConfigError::Read { .. })));
    }

    #[test]
    fn echo_lists_every_key() {
        let e = Config::default().echo();
        assert_eq!(e.len(), Config::KEYS.len());
        assert!(e.contains(&"mod.hgrid = 24".to_string()));
    }
}
