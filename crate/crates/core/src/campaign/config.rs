// SPDX-License-Identifier: Apache-2.0

//! Harness configuration file. Relative paths resolve against the file's
//! directory.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::manifest::valid_id;
use super::CampaignError;
use crate::scoring::WeightConfig;
use crate::task::AccessType;
use crate::toolchain::{ExternalToolsConfig, ToolchainConfig};

pub const CONFIG_SCHEMA: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EndpointConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://openrouter.ai/api/v1`.
    pub base_url: String,
    /// Model name sent in the request body.
    pub model: String,
    /// Environment variable holding the bearer token.
    pub auth_env: String,
    #[serde(default)]
    pub temperature: Option<f64>,
    #[serde(default)]
    pub max_tokens: Option<u32>,
    #[serde(default = "default_request_timeout")]
    pub request_timeout_s: f64,
}

fn default_request_timeout() -> f64 {
    600.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub id: String,
    pub access_type: AccessType,
    #[serde(default)]
    pub endpoint: Option<EndpointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TierThresholds {
    pub tier1_min: f64,
    pub tier3_below: f64,
}

impl Default for TierThresholds {
    fn default() -> Self {
        Self {
            tier1_min: 71.0,
            tier3_below: 53.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    pub schema: u32,
    pub manifest: PathBuf,
    #[serde(default = "default_journal")]
    pub journal: PathBuf,
    #[serde(default = "default_golden_cache")]
    pub golden_cache: PathBuf,
    /// Directory of pre-generated responses; used instead of endpoints.
    #[serde(default)]
    pub pregen_dir: Option<PathBuf>,
    /// Table file for the deterministic mock backend.
    #[serde(default)]
    pub mock_tables: Option<PathBuf>,
    /// Replacement taxonomy rule file.
    #[serde(default)]
    pub rules: Option<PathBuf>,
    #[serde(default = "default_k")]
    pub k: u32,
    /// 0 lets the thread pool decide.
    #[serde(default)]
    pub workers: usize,
    /// `{prompt}`, `{task}` and `{top}` are substituted.
    #[serde(default = "default_prompt_template")]
    pub prompt_template: String,
    #[serde(default)]
    pub weights: Option<WeightConfig>,
    #[serde(default)]
    pub sensitivity_configs: Option<Vec<WeightConfig>>,
    #[serde(default)]
    pub tiers: TierThresholds,
    pub toolchain: ToolchainConfig,
    #[serde(default)]
    pub tools: Option<ExternalToolsConfig>,
    #[serde(rename = "model", default)]
    pub models: Vec<ModelConfig>,
}

fn default_journal() -> PathBuf {
    PathBuf::from("journal.jsonl")
}
fn default_golden_cache() -> PathBuf {
    PathBuf::from("golden.json")
}
fn default_k() -> u32 {
    5
}
fn default_prompt_template() -> String {
    "{prompt}".to_string()
}

impl HarnessConfig {
    pub fn load(path: &Path) -> Result<Self, CampaignError> {
        let text = std::fs::read_to_string(path).map_err(|e| CampaignError::io(path, e))?;
        let mut cfg: HarnessConfig = toml::from_str(&text).map_err(|e| CampaignError::config(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve(base);
        cfg.validate().map_err(|m| CampaignError::config(path, m))?;
        Ok(cfg)
    }

    fn resolve(&mut self, base: &Path) {
        let join = |p: &mut PathBuf| *p = base.join(&*p);
        join(&mut self.manifest);
        join(&mut self.journal);
        join(&mut self.golden_cache);
        for p in [&mut self.pregen_dir, &mut self.mock_tables, &mut self.rules]
            .into_iter()
            .flatten()
        {
            join(p);
        }
        if let Some(tools) = &mut self.tools {
            for lib in tools.libraries.values_mut() {
                join(lib);
            }
            if let Some(s) = &mut tools.scratch_root {
                join(s);
            }
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.schema != CONFIG_SCHEMA {
            return Err(format!("unsupported config schema {} (expected {CONFIG_SCHEMA})", self.schema));
        }
        if self.k == 0 {
            return Err("k must be at least 1".into());
        }
        let mut ids = std::collections::BTreeSet::new();
        for m in &self.models {
            if !valid_id(&m.id) {
                return Err(format!("invalid model id `{}`", m.id));
            }
            if !ids.insert(&m.id) {
                return Err(format!("duplicate model id `{}`", m.id));
            }
        }
        self.weights().validate().map_err(|e| e.to_string())?;
        if let Some(cfgs) = &self.sensitivity_configs {
            for c in cfgs {
                c.validate().map_err(|e| e.to_string())?;
            }
        }
        if self.tiers.tier3_below > self.tiers.tier1_min {
            return Err("tier thresholds overlap".into());
        }
        Ok(())
    }

    pub fn weights(&self) -> WeightConfig {
        self.weights.unwrap_or_default()
    }

    pub fn model(&self, id: &str) -> Option<&ModelConfig> {
        self.models.iter().find(|m| m.id == id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const CFG: &str = r#"
schema = 1
manifest = "tasks/manifest.toml"
pregen_dir = "pregen"
k = 3

[toolchain]
default_library = "nangate45"
alternate_libraries = ["sg13g2"]

[[model]]
id = "m1"
access_type = "proprietary"

[[model]]
id = "m2"
access_type = "open_weight"
endpoint = { base_url = "http://localhost:1", model = "x/y", auth_env = "KEY" }
"#;

    #[test]
    fn parses_and_resolves_paths() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, CFG).unwrap();
        let c = HarnessConfig::load(&p).unwrap();
        assert_eq!(c.manifest, dir.path().join("tasks/manifest.toml"));
        assert_eq!(c.journal, dir.path().join("journal.jsonl"));
        assert_eq!(c.weights(), WeightConfig::default());
        assert_eq!(c.models[1].endpoint.as_ref().unwrap().request_timeout_s, 600.0);
        assert_eq!(c.toolchain.synth_timeout_s, 30.0);
    }

    #[test]
    fn rejects_bad_values() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        for bad in [CFG.replace("k = 3", "k = 0"), CFG.replace("id = \"m2\"", "id = \"m1\""), CFG.replace("schema = 1", "schema = 9")] {
            std::fs::write(&p, bad).unwrap();
            assert!(HarnessConfig::load(&p).is_err());
        }
    }
}
