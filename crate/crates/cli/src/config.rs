//! Structured-text configuration: TOML sections for the cluster, the
//! solver, and the experiment, with `CRANSIM_`-prefixed environment
//! overrides applied before deserialization.

use anyhow::{bail, Context, Result};
use cransim_core::sim::{SolverOptions, TrialSeeds};
use cransim_core::ClusterConfig64;
use serde::{Deserialize, Serialize};
use std::path::Path;

/// Environment-variable prefix for config-key overrides
/// (`CRANSIM_<SECTION>_<KEY>`, e.g. `CRANSIM_CLUSTER_SEED=7`).
pub const ENV_PREFIX: &str = "CRANSIM_";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClusterSection {
    pub n: usize,
    pub bandwidth_hz: f64,
    pub slot_s: f64,
    pub noise_w: f64,
    pub c_tot: f64,
    /// Path-loss gain matrix, one row per RRH.
    pub path_loss: Vec<Vec<f64>>,
    pub p0_w: Vec<f64>,
    pub p_max_w: Vec<f64>,
    pub lambda_bps: Vec<f64>,
    pub beta: Vec<f64>,
    pub seed: u64,
}

impl ClusterSection {
    pub fn to_cluster(&self) -> Result<ClusterConfig64> {
        let cluster = ClusterConfig64 {
            n: self.n,
            w_hz: self.bandwidth_hz,
            tau_s: self.slot_s,
            sigma2: self.noise_w,
            c_tot: self.c_tot,
            path_loss: self.path_loss.iter().flatten().copied().collect(),
            p0_w: self.p0_w.clone(),
            p_max_w: self.p_max_w.clone(),
            lambda_bps: self.lambda_bps.clone(),
            beta: self.beta.clone(),
            seed: self.seed,
        };
        cluster.validate().context("invalid [cluster] section")?;
        Ok(cluster)
    }

    pub fn from_cluster(c: &ClusterConfig64) -> Self {
        Self {
            n: c.n,
            bandwidth_hz: c.w_hz,
            slot_s: c.tau_s,
            noise_w: c.sigma2,
            c_tot: c.c_tot,
            path_loss: (0..c.n)
                .map(|i| (0..c.n).map(|j| c.l(i, j)).collect())
                .collect(),
            p0_w: c.p0_w.clone(),
            p_max_w: c.p_max_w.clone(),
            lambda_bps: c.lambda_bps.clone(),
            beta: c.beta.clone(),
            seed: c.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverSection {
    pub gamma_init: f64,
    pub mu_power_init: Vec<f64>,
    pub grid_points: usize,
    pub q_max_factor: f64,
    pub alpha_guard: f64,
    pub pilot_slots: usize,
    pub tune_pilot_slots: usize,
    pub tune_pilot_trials: usize,
    pub q_ref_override: Option<Vec<f64>>,
}

impl Default for SolverSection {
    fn default() -> Self {
        Self {
            gamma_init: 1e-4,
            mu_power_init: Vec::new(),
            grid_points: 256,
            q_max_factor: 100.0,
            alpha_guard: 10.0,
            pilot_slots: 4_000,
            tune_pilot_slots: 20_000,
            tune_pilot_trials: 2,
            q_ref_override: None,
        }
    }
}

impl SolverSection {
    pub fn to_options(&self, cluster: &ClusterConfig64) -> SolverOptions {
        let mut opts = SolverOptions::for_cluster(cluster);
        opts.gamma_init = self.gamma_init;
        if !self.mu_power_init.is_empty() {
            opts.mu_power_init = self.mu_power_init.clone();
        }
        opts.grid_points = self.grid_points;
        opts.q_max_factor = self.q_max_factor;
        opts.alpha_guard = self.alpha_guard;
        opts.pilot_slots = self.pilot_slots;
        opts.tune_pilot_slots = self.tune_pilot_slots;
        opts.tune_pilot_trials = self.tune_pilot_trials;
        opts.q_ref_override = self.q_ref_override.clone();
        opts
    }
}

/// The experiment to run.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSection {
    /// One of `single`, `lambda_sweep`, `ctot_sweep`, `finite_service`,
    /// `pareto`.
    pub kind: String,
    /// Policy of `single` runs: `joint`, `fixed_power`, `discounted`,
    /// `numeric`.
    pub policy: String,
    pub trials: usize,
    pub horizon_slots: usize,
    pub burn_in: usize,
    /// Sweep values: λ₁ (bits/s), C_tot (bits/s/Hz), or μ, by kind.
    pub sweep_values: Vec<f64>,
    /// λ₁ sweep points probed from the fixed-power capacity when
    /// `sweep_values` is empty.
    pub auto_sweep_points: usize,
    /// Continue-probability of `single` discounted/geometric runs.
    pub mu: Option<f64>,
    /// Initial backlog as a multiple of the mean per-slot arrival.
    pub q_init_factor: f64,
    /// Weight pairs of the Pareto sweep.
    pub beta_grid: Vec<Vec<f64>>,
    /// Power-fairness budget of the sweep experiments: the joint scheme's
    /// mean dynamic power as a fraction of the shared constant power
    /// (soft cap; relaxes in overload).
    pub power_budget_frac: Option<f64>,
    /// Write the per-slot trace of trial 0 (single runs).
    pub write_trace: bool,
    /// Multiplier file to load instead of tuning (single runs).
    pub multipliers_file: Option<String>,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        Self {
            kind: "single".into(),
            policy: "joint".into(),
            trials: 1,
            horizon_slots: 10_000,
            burn_in: 0,
            sweep_values: Vec::new(),
            auto_sweep_points: 8,
            mu: None,
            q_init_factor: 0.0,
            beta_grid: Vec::new(),
            power_budget_frac: None,
            write_trace: true,
            multipliers_file: None,
        }
    }
}

/// A full run configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileConfig {
    pub cluster: ClusterSection,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub experiment: ExperimentSection,
}

impl FileConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut value: toml::Table = text.parse().context("config is not valid TOML")?;
        // A manifest embeds the resolved config under [config].
        if value.contains_key("run") {
            let config = value
                .remove("config")
                .context("manifest is missing its [config] table")?;
            let table = match config {
                toml::Value::Table(t) => t,
                _ => bail!("manifest [config] is not a table"),
            };
            value = table;
        }
        apply_env_overrides(&mut value, std::env::vars());
        let cfg: FileConfig = toml::Value::Table(value)
            .try_into()
            .context("config does not match the expected schema")?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

/// Applies `CRANSIM_SECTION_KEY=value` overrides onto the parsed config
/// table. Values parse as TOML literals, falling back to strings.
pub fn apply_env_overrides(
    table: &mut toml::Table,
    vars: impl Iterator<Item = (String, String)>,
) {
    for (key, raw) in vars {
        let Some(rest) = key.strip_prefix(ENV_PREFIX) else {
            continue;
        };
        let Some((section, field)) = rest.split_once('_') else {
            continue;
        };
        let section = section.to_ascii_lowercase();
        let field = field.to_ascii_lowercase();
        let value: toml::Value = raw
            .parse::<toml::Value>()
            .unwrap_or(toml::Value::String(raw.clone()));
        let entry = table
            .entry(section)
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        if let toml::Value::Table(t) = entry {
            t.insert(field, value);
        }
    }
}

/// Tuned-multiplier file contents.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MultipliersFile {
    pub gamma: f64,
    pub mu_power: Vec<f64>,
    pub measured_capacity: f64,
    pub measured_power_w: Vec<f64>,
}

impl MultipliersFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read multipliers file {}", path.display()))?;
        toml::from_str(&text).context("multipliers file does not match the expected schema")
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("multipliers serialize")
    }
}

/// Seeds echoed into manifests for reproduction.
pub fn seeds_for(base: u64, sweep: u64, trial: u64) -> TrialSeeds {
    cransim_core::sim::trial_seeds(base, sweep, trial)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[cluster]
n = 1
bandwidth_hz = 2e6
slot_s = 1e-3
noise_w = 1.0
c_tot = 10.0
path_loss = [[1.0]]
p0_w = [10.0]
p_max_w = [100.0]
lambda_bps = [1e5]
beta = [1.0]
seed = 3
"#;

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = FileConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(cfg.cluster.n, 1);
        assert_eq!(cfg.experiment.kind, "single");
        assert_eq!(cfg.solver.grid_points, 256);
        cfg.cluster.to_cluster().unwrap();
    }

    #[test]
    fn env_overrides_apply_to_sections() {
        let mut table: toml::Table = MINIMAL.parse().unwrap();
        apply_env_overrides(
            &mut table,
            vec![
                ("CRANSIM_CLUSTER_SEED".to_string(), "99".to_string()),
                ("CRANSIM_EXPERIMENT_TRIALS".to_string(), "7".to_string()),
                ("OTHER_VAR".to_string(), "1".to_string()),
            ]
            .into_iter(),
        );
        let cfg: FileConfig = toml::Value::Table(table).try_into().unwrap();
        assert_eq!(cfg.cluster.seed, 99);
        assert_eq!(cfg.experiment.trials, 7);
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = FileConfig::from_toml_str(MINIMAL).unwrap();
        let text = cfg.to_toml_string();
        let back = FileConfig::from_toml_str(&text).unwrap();
        assert_eq!(back.cluster.seed, cfg.cluster.seed);
        assert_eq!(back.cluster.path_loss, cfg.cluster.path_loss);
    }
}
