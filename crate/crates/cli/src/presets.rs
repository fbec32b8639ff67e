//! Shipped experiment presets.
//!
//! Physical scale is normalized (σ² = 1 W, unit straight-link gains); the
//! bandwidth, slot length, fronthaul budget, cluster size, and trial counts
//! follow the reference experiments. Cross-links sit one order of magnitude
//! below the straight links where the preset exercises them.

use crate::config::{ClusterSection, ExperimentSection, FileConfig, SolverSection};

fn base_cluster() -> ClusterSection {
    ClusterSection {
        n: 2,
        bandwidth_hz: 2e6,
        slot_s: 1e-3,
        noise_w: 1.0,
        c_tot: 10.0,
        path_loss: vec![vec![1.0, 0.1], vec![0.1, 1.0]],
        p0_w: vec![2.0, 2.0],
        p_max_w: vec![40.0, 40.0],
        lambda_bps: vec![4e5, 2e5],
        beta: vec![1.0, 1.0],
        seed: 20_26,
    }
}

fn base_solver() -> SolverSection {
    SolverSection {
        gamma_init: 1e-3,
        mu_power_init: vec![0.1, 0.1],
        ..SolverSection::default()
    }
}

/// Sum of average delays vs user-1 arrival rate, joint vs fixed power.
/// The sweep range is probed from the fixed-power stability boundary.
pub fn fig2() -> FileConfig {
    FileConfig {
        cluster: base_cluster(),
        solver: base_solver(),
        experiment: ExperimentSection {
            kind: "lambda_sweep".into(),
            trials: 20,
            horizon_slots: 60_000,
            auto_sweep_points: 8,
            power_budget_frac: Some(0.25),
            write_trace: false,
            ..ExperimentSection::default()
        },
    }
}

/// Sum of average delays vs total fronthaul budget at fixed arrival rates.
pub fn fig3() -> FileConfig {
    let mut cluster = base_cluster();
    cluster.lambda_bps = vec![6.5e5, 2e5];
    FileConfig {
        cluster,
        solver: base_solver(),
        experiment: ExperimentSection {
            kind: "ctot_sweep".into(),
            trials: 20,
            horizon_slots: 60_000,
            sweep_values: vec![4.0, 6.0, 8.0, 10.0, 12.0, 14.0],
            power_budget_frac: Some(0.25),
            write_trace: false,
            ..ExperimentSection::default()
        },
    }
}

/// Sum of expected total delays vs continue-probability μ, discounted vs
/// time-average policy over geometric service horizons.
pub fn fig4() -> FileConfig {
    let mut cluster = base_cluster();
    cluster.lambda_bps = vec![2e5, 2e5];
    FileConfig {
        cluster,
        solver: base_solver(),
        experiment: ExperimentSection {
            kind: "finite_service".into(),
            trials: 50,
            sweep_values: vec![0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99],
            q_init_factor: 3.0,
            write_trace: false,
            ..ExperimentSection::default()
        },
    }
}

/// Two-user delay trade-off sweep over the weight ratio, on a symmetric
/// isolated-cell cluster sharing one fronthaul budget.
pub fn pareto() -> FileConfig {
    let mut cluster = base_cluster();
    cluster.path_loss = vec![vec![1.0, 0.0], vec![0.0, 1.0]];
    cluster.lambda_bps = vec![2e5, 2e5];
    FileConfig {
        cluster,
        solver: base_solver(),
        experiment: ExperimentSection {
            kind: "pareto".into(),
            trials: 12,
            horizon_slots: 40_000,
            beta_grid: vec![
                vec![1.0, 0.0],
                vec![8.0, 1.0],
                vec![4.0, 1.0],
                vec![2.0, 1.0],
                vec![1.0, 1.0],
                vec![1.0, 2.0],
                vec![1.0, 4.0],
                vec![1.0, 8.0],
                vec![0.0, 1.0],
            ],
            write_trace: false,
            ..ExperimentSection::default()
        },
    }
}

pub fn by_name(name: &str) -> Option<FileConfig> {
    match name {
        "fig2" => Some(fig2()),
        "fig3" => Some(fig3()),
        "fig4" => Some(fig4()),
        "pareto" => Some(pareto()),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_produce_valid_clusters() {
        for name in ["fig2", "fig3", "fig4", "pareto"] {
            let cfg = by_name(name).unwrap();
            cfg.cluster.to_cluster().unwrap();
        }
        assert!(by_name("fig9").is_none());
    }
}
