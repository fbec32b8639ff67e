//! Run manifests: enough to bit-reproduce every artifact-producing command.

use crate::config::FileConfig;
use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunInfo {
    pub command: String,
    pub version: String,
    pub created_unix: u64,
    pub base_seed: u64,
    pub outputs: Vec<String>,
}

/// Manifest = run metadata plus the fully resolved configuration. Feeding a
/// manifest back to `simulate --config` reruns it bit-for-bit (timestamps
/// aside, which live only in the manifest itself).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub run: RunInfo,
    pub config: FileConfig,
}

impl RunManifest {
    pub fn new(command: &str, config: FileConfig, outputs: Vec<String>) -> Self {
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Self {
            run: RunInfo {
                command: command.into(),
                version: env!("CARGO_PKG_VERSION").into(),
                created_unix,
                base_seed: config.cluster.seed,
                outputs,
            },
            config,
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_toml_string())
            .with_context(|| format!("cannot write manifest {}", path.display()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;

    #[test]
    fn manifest_embeds_a_reloadable_config() {
        let cfg = presets::fig2();
        let manifest = RunManifest::new("simulate", cfg.clone(), vec!["metrics.csv".into()]);
        let text = manifest.to_toml_string();
        // A manifest is itself a valid simulate input.
        let reloaded = FileConfig::from_toml_str(&text).unwrap();
        assert_eq!(reloaded.cluster.seed, cfg.cluster.seed);
        assert_eq!(reloaded.experiment.kind, cfg.experiment.kind);
    }
}
