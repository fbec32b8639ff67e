//! Command implementations. Each returns a process exit code:
//! 0 success, 1 validation failure, 2 configuration error,
//! 3 infeasibility (tuning or table solve).

use crate::config::{FileConfig, MultipliersFile};
use crate::manifest::RunManifest;
use crate::{csvio, plot, presets};
use anyhow::{anyhow, bail, Context, Result};
use cransim_core::error::Error as CoreError;
use cransim_core::sim::engine::{run_trial, TrialSetup};
use cransim_core::sim::experiments::{
    pareto_sweep, run_average_reward_experiment, run_finite_service_experiment, AverageSweep,
    AverageSweepConfig, FiniteServiceConfig, ParetoConfig, SweepPointResult,
};
use cransim_core::sim::lemma2::{lemma2_check, ToyMdp};
use cransim_core::sim::tuning::{tune_multipliers, TuneTargets};
use cransim_core::sim::{
    build_discounted_policy, build_fixed_policy, build_joint_policy, metrics_from_trace,
    trial_seeds, Horizon, PolicyBundle, PolicyKind,
};
use cransim_core::validate::{Level, ValidationSuite};
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_INFEASIBLE: i32 = 3;

/// Shared CLI flags that override config values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub trials: Option<usize>,
    pub emit_plots: bool,
}

fn classify(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<CoreError>() {
            return match core {
                CoreError::Infeasible(_)
                | CoreError::NoRoot { .. }
                | CoreError::RateDeficit { .. }
                | CoreError::TableInvariant { .. } => EXIT_INFEASIBLE,
                _ => EXIT_CONFIG,
            };
        }
    }
    EXIT_CONFIG
}

/// Loads a config from `--preset` or `--config` (the latter may be a
/// manifest) and applies flag overrides.
pub fn load_config(
    config_path: Option<&Path>,
    preset: Option<&str>,
    overrides: &Overrides,
) -> Result<FileConfig> {
    let mut cfg = match (config_path, preset) {
        (Some(path), None) => FileConfig::load(path)?,
        (None, Some(name)) => presets::by_name(name)
            .ok_or_else(|| anyhow!("unknown preset '{name}' (expected fig2|fig3|fig4|pareto)"))?,
        (Some(_), Some(_)) => bail!("pass either --config or --preset, not both"),
        (None, None) => bail!("a config file (--config) or preset (--preset) is required"),
    };
    if let Some(seed) = overrides.seed {
        cfg.cluster.seed = seed;
    }
    if let Some(trials) = overrides.trials {
        cfg.experiment.trials = trials;
    }
    Ok(cfg)
}

fn write_output(out_dir: &Path, name: &str, contents: &str, outputs: &mut Vec<String>) -> Result<()> {
    std::fs::create_dir_all(out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    let path = out_dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))?;
    outputs.push(name.to_string());
    Ok(())
}

fn policy_kind(name: &str) -> Result<PolicyKind> {
    Ok(match name {
        "joint" => PolicyKind::Joint,
        "fixed_power" => PolicyKind::FixedPower,
        "discounted" => PolicyKind::Discounted,
        "numeric" => PolicyKind::Numeric,
        other => bail!("unknown policy '{other}'"),
    })
}

/// `simulate`: runs the configured experiment and writes metrics CSV,
/// optional trace CSV and plots, and the manifest.
pub fn cmd_simulate(
    config_path: Option<&Path>,
    preset: Option<&str>,
    out_dir: &Path,
    overrides: &Overrides,
) -> i32 {
    let cfg = match load_config(config_path, preset, overrides) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("config error: {err:#}");
            return EXIT_CONFIG;
        }
    };
    match run_simulate(&cfg, out_dir, overrides) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("simulate failed: {err:#}");
            classify(&err)
        }
    }
}

fn run_simulate(cfg: &FileConfig, out_dir: &Path, overrides: &Overrides) -> Result<()> {
    let cluster = cfg.cluster.to_cluster()?;
    let solver = cfg.solver.to_options(&cluster);
    let exp = &cfg.experiment;
    let mut outputs = Vec::new();

    match exp.kind.as_str() {
        "single" => {
            let kind = policy_kind(&exp.policy)?;
            let (gamma, mu_power) = match &exp.multipliers_file {
                Some(path) => {
                    let m = MultipliersFile::load(Path::new(path))?;
                    (m.gamma, m.mu_power)
                }
                None => {
                    let targets = TuneTargets {
                        c_tot: cluster.c_tot,
                        power_w: None,
                    };
                    let tuned = tune_multipliers(&cluster, kind, &solver, &targets, cluster.seed)?;
                    (tuned.gamma, tuned.mu_power)
                }
            };
            let policy: PolicyBundle = match kind {
                PolicyKind::FixedPower => build_fixed_policy(&cluster, gamma, &solver)?,
                PolicyKind::Discounted => {
                    let mu = exp
                        .mu
                        .ok_or_else(|| anyhow!("discounted single runs need experiment.mu"))?;
                    build_discounted_policy(&cluster, gamma, mu, &solver)?
                }
                PolicyKind::Joint | PolicyKind::Numeric => {
                    let mut bundle = build_joint_policy(&cluster, gamma, mu_power, &solver)?;
                    bundle.kind = kind;
                    bundle
                }
            };
            let horizon = match (policy.kind, exp.mu) {
                (PolicyKind::Discounted, Some(mu)) => Horizon::Geometric { mu },
                _ => Horizon::Fixed(exp.horizon_slots),
            };
            let q_init: Vec<f64> = (0..cluster.n)
                .map(|i| exp.q_init_factor * cluster.lambda_bps[i] * cluster.tau_s)
                .collect();
            let mut rows: Vec<SweepPointResult> = Vec::new();
            let mut first_trace = None;
            for t in 0..exp.trials.max(1) {
                let trace = run_trial(
                    &TrialSetup {
                        cluster: &cluster,
                        policy: &policy,
                        horizon,
                        q_init: q_init.clone(),
                    },
                    trial_seeds(cluster.seed, 0, t as u64),
                )?;
                let metrics = metrics_from_trace(&trace, &cluster, exp.mu)?;
                let metric: f64 = cluster
                    .beta
                    .iter()
                    .zip(&metrics.avg_delay_s)
                    .map(|(b, d)| b * d)
                    .sum();
                rows.push(SweepPointResult {
                    sweep_value: t as f64,
                    policy: exp.policy.clone(),
                    mean_metric: metric,
                    ci_low: metric,
                    ci_high: metric,
                    unstable_fraction: if metrics.unstable { 1.0 } else { 0.0 },
                    per_user_delay_s: metrics.avg_delay_s.clone(),
                    per_user_power_w: vec![f64::NAN; cluster.n],
                    capacity_sum: metrics.avg_capacity.iter().sum(),
                });
                if t == 0 {
                    first_trace = Some(trace);
                }
            }
            write_output(out_dir, "metrics.csv", &csvio::metrics_csv(&rows), &mut outputs)?;
            if exp.write_trace {
                if let Some(trace) = &first_trace {
                    write_output(out_dir, "trace.csv", &csvio::trace_csv(trace), &mut outputs)?;
                }
            }
            write_output(
                out_dir,
                "priority_table.csv",
                &csvio::table_csv(&policy.table),
                &mut outputs,
            )?;
        }
        "lambda_sweep" | "ctot_sweep" => {
            let sweep = if exp.kind == "ctot_sweep" {
                if exp.sweep_values.is_empty() {
                    bail!("ctot_sweep needs experiment.sweep_values");
                }
                AverageSweep::CTot(exp.sweep_values.clone())
            } else if exp.sweep_values.is_empty() {
                AverageSweep::Lambda1Auto {
                    points: exp.auto_sweep_points,
                }
            } else {
                AverageSweep::Lambda1(exp.sweep_values.clone())
            };
            let avg_cfg = AverageSweepConfig {
                cluster: cluster.clone(),
                solver,
                sweep,
                trials: exp.trials,
                horizon_slots: exp.horizon_slots,
                burn_in: exp.burn_in,
                power_budget_frac: exp.power_budget_frac,
                base_seed: cluster.seed,
            };
            let rows = run_average_reward_experiment(&avg_cfg)?;
            write_output(out_dir, "metrics.csv", &csvio::metrics_csv(&rows), &mut outputs)?;
            if overrides.emit_plots {
                let x_label = if exp.kind == "ctot_sweep" {
                    "total fronthaul budget (bits/s/Hz)"
                } else {
                    "user 1 arrival rate (bits/s)"
                };
                let svg = plot::sweep_chart(&rows, x_label, "weighted sum of average delays (s)", &exp.kind);
                write_output(out_dir, "metrics.svg", &svg, &mut outputs)?;
            }
        }
        "finite_service" => {
            if exp.sweep_values.is_empty() {
                bail!("finite_service needs experiment.sweep_values (the mu sweep)");
            }
            let fin_cfg = FiniteServiceConfig {
                cluster: cluster.clone(),
                solver,
                mu_values: exp.sweep_values.clone(),
                trials: exp.trials,
                q_init_factor: exp.q_init_factor,
                base_seed: cluster.seed,
            };
            let rows = run_finite_service_experiment(&fin_cfg)?;
            write_output(out_dir, "metrics.csv", &csvio::metrics_csv(&rows), &mut outputs)?;
            if overrides.emit_plots {
                let svg = plot::sweep_chart(
                    &rows,
                    "continue-probability mu",
                    "weighted sum of total delays (s)",
                    "finite_service",
                );
                write_output(out_dir, "metrics.svg", &svg, &mut outputs)?;
            }
        }
        "pareto" => {
            let beta_grid: Vec<(f64, f64)> = exp
                .beta_grid
                .iter()
                .map(|pair| {
                    if pair.len() == 2 {
                        Ok((pair[0], pair[1]))
                    } else {
                        Err(anyhow!("beta_grid entries must be [b1, b2] pairs"))
                    }
                })
                .collect::<Result<_>>()?;
            let par_cfg = ParetoConfig {
                cluster: cluster.clone(),
                solver,
                beta_grid,
                trials: exp.trials,
                horizon_slots: exp.horizon_slots,
                burn_in: exp.burn_in,
                base_seed: cluster.seed,
            };
            let points = pareto_sweep(&par_cfg)?;
            write_output(out_dir, "pareto.csv", &csvio::pareto_csv(&points), &mut outputs)?;
            if overrides.emit_plots {
                let svg = plot::pareto_chart(&points, "delay trade-off over weight sweep");
                write_output(out_dir, "pareto.svg", &svg, &mut outputs)?;
            }
        }
        other => bail!("unknown experiment kind '{other}'"),
    }

    RunManifest::new("simulate", cfg.clone(), outputs).write(&out_dir.join("manifest.toml"))?;
    Ok(())
}

/// `tune`: calibrates (γ, μᵢ) and writes them to a reusable TOML file.
pub fn cmd_tune(
    config_path: Option<&Path>,
    preset: Option<&str>,
    out_path: &Path,
    overrides: &Overrides,
) -> i32 {
    let cfg = match load_config(config_path, preset, overrides) {
        Ok(c) => c,
        Err(err) => {
            eprintln!("config error: {err:#}");
            return EXIT_CONFIG;
        }
    };
    match run_tune(&cfg, out_path) {
        Ok(()) => EXIT_OK,
        Err(err) => {
            eprintln!("tune failed: {err:#}");
            classify(&err)
        }
    }
}

fn run_tune(cfg: &FileConfig, out_path: &Path) -> Result<()> {
    let cluster = cfg.cluster.to_cluster()?;
    let solver = cfg.solver.to_options(&cluster);
    let kind = policy_kind(&cfg.experiment.policy)?;
    let targets = TuneTargets {
        c_tot: cluster.c_tot,
        power_w: None,
    };
    let tuned = tune_multipliers(&cluster, kind, &solver, &targets, cluster.seed)?;
    let file = MultipliersFile {
        gamma: tuned.gamma,
        mu_power: tuned.mu_power,
        measured_capacity: tuned.capacity_sum,
        measured_power_w: tuned.dynamic_power_w,
    };
    if let Some(parent) = out_path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(out_path, file.to_toml_string())
        .with_context(|| format!("cannot write {}", out_path.display()))?;
    println!(
        "tuned gamma = {:.6e}, capacity usage {:.4} of budget {:.4}",
        file.gamma, file.measured_capacity, cluster.c_tot
    );
    Ok(())
}

/// `validate`: runs the oracle suites and prints a pass/fail table.
pub fn cmd_validate(level_name: &str) -> i32 {
    let level = match level_name {
        "fast" => Level::Fast,
        "full" => Level::Full,
        other => {
            eprintln!("unknown validation level '{other}' (expected fast|full)");
            return EXIT_CONFIG;
        }
    };
    let results = ValidationSuite::new(level).run();
    let mut failed = 0usize;
    for r in &results {
        let status = if r.pass { "PASS" } else { "FAIL" };
        println!("[{status}] {:42} {}", r.name, r.detail);
        if !r.pass {
            failed += 1;
        }
    }
    println!("{} checks, {} failed", results.len(), failed);
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

/// `lemma2`: geometric-horizon vs discounted equivalence on random toy MDPs.
pub fn cmd_lemma2(mu_values: &[f64], trials: usize, seed: u64) -> i32 {
    let mut failed = 0usize;
    for (k, &mu) in mu_values.iter().enumerate() {
        let toy = ToyMdp::random(3, 2, seed.wrapping_add(k as u64));
        let policy = [k % 2, (k + 1) % 2, 0];
        let start = [0.4, 0.3, 0.3];
        match lemma2_check(&toy, &policy, mu, trials, &start, seed ^ 0x1e44a2 ^ k as u64) {
            Ok(report) => {
                let pass = report.gap_se < 3.0;
                if !pass {
                    failed += 1;
                }
                println!(
                    "[{}] mu={mu}: MC {:.6} vs exact {:.6} ({:.2} SE over {trials} trials)",
                    if pass { "PASS" } else { "FAIL" },
                    report.mc_mean,
                    report.exact,
                    report.gap_se
                );
            }
            Err(err) => {
                failed += 1;
                println!("[FAIL] mu={mu}: {err}");
            }
        }
    }
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

/// Output directory helper shared by main.
pub fn default_out_dir() -> PathBuf {
    PathBuf::from("runs")
}
