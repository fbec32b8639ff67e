use cransim_core::model::ClusterConfig;
use cransim_core::sim::experiments::{run_finite_service_experiment, FiniteServiceConfig};
use cransim_core::sim::SolverOptions;

fn main() {
    let cl = ClusterConfig {
        n: 2, w_hz: 2e6, tau_s: 1e-3, sigma2: 1.0, c_tot: 10.0,
        path_loss: vec![1.0, 0.1, 0.1, 1.0],
        p0_w: vec![2.0, 2.0], p_max_w: vec![40.0, 40.0],
        lambda_bps: vec![2e5, 2e5], beta: vec![1.0, 1.0], seed: 2026,
    };
    let mut opts = SolverOptions::for_cluster(&cl);
    opts.gamma_init = 1e-3;
    opts.mu_power_init = vec![0.1, 0.1];
    let cfg = FiniteServiceConfig {
        cluster: cl,
        solver: opts,
        mu_values: vec![0.5, 0.7, 0.9, 0.95, 0.99],
        trials: 30,
        q_init_factor: 3.0,
        base_seed: 2026,
    };
    match run_finite_service_experiment(&cfg) {
        Ok(rows) => {
            for pair in rows.chunks(2) {
                let d = &pair[0]; let a = &pair[1];
                println!("mu={:>5}: disc d={:<10.4e} cap={:<8.2} | avg d={:<10.4e} cap={:<8.2} | gap {:+.4e} ratio {:.3}",
                    d.sweep_value, d.mean_metric, d.capacity_sum, a.mean_metric, a.capacity_sum,
                    a.mean_metric - d.mean_metric, a.mean_metric / d.mean_metric);
            }
        }
        Err(e) => println!("experiment error: {e}"),
    }
}
