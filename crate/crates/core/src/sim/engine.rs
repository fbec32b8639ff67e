//! The slot loop: sample channel → allocate → rates → queue step → record.

use super::{Horizon, PolicyBundle, PolicyKind, TrialSeeds};
use crate::allocator::{allocate_fixed_power, allocate_joint, allocate_numeric, SlotContext};
use crate::error::Result;
use crate::model::{rates, sample_channel};
use crate::queueing::{queue_step, sample_arrivals, slot_record, Trace};
use crate::{ChannelRealization64, ClusterConfig64, Trace64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Hard cap on geometric horizon draws.
const HORIZON_CAP: usize = 10_000_000;

/// Immutable inputs of one trial.
pub struct TrialSetup<'a> {
    pub cluster: &'a ClusterConfig64,
    pub policy: &'a PolicyBundle,
    pub horizon: Horizon,
    /// Backlog at slot 1, in bits.
    pub q_init: Vec<f64>,
}

/// Runs one trial with the default channel sampler.
pub fn run_trial(setup: &TrialSetup<'_>, seeds: TrialSeeds) -> Result<Trace64> {
    run_trial_with(setup, seeds, |rng| sample_channel(setup.cluster, rng))
}

/// Runs one trial with an injectable channel source (tests script channels
/// through here). The channel and arrival streams are separate ChaCha
/// instances, so decisions never perturb either stream.
pub fn run_trial_with<F>(setup: &TrialSetup<'_>, seeds: TrialSeeds, mut channel_fn: F) -> Result<Trace64>
where
    F: FnMut(&mut ChaCha8Rng) -> Result<ChannelRealization64>,
{
    let cluster = setup.cluster;
    let policy = setup.policy;
    let mut channel_rng = ChaCha8Rng::seed_from_u64(seeds.channel);
    let mut arrival_rng = ChaCha8Rng::seed_from_u64(seeds.arrival);
    let horizon = match setup.horizon {
        Horizon::Fixed(t) => t,
        Horizon::Geometric { mu } => {
            let mut horizon_rng = ChaCha8Rng::seed_from_u64(seeds.horizon);
            draw_geometric(&mut horizon_rng, mu)
        }
    };

    let mut q = setup.q_init.clone();
    let mut records = Vec::with_capacity(horizon);
    for _ in 0..horizon {
        let channel = channel_fn(&mut channel_rng)?;
        let ctx = SlotContext {
            channel: &channel,
            q: &q,
            table: &policy.table,
            crosslink: policy.crosslink.as_ref(),
            params: &policy.params,
        };
        let allocation = match policy.kind {
            PolicyKind::Joint => allocate_joint(&ctx).0,
            PolicyKind::FixedPower | PolicyKind::Discounted => {
                allocate_fixed_power(&ctx, policy.policy_mu)
            }
            PolicyKind::Numeric => allocate_numeric(&ctx).allocation,
        };
        let r = rates(&channel, &allocation, cluster);
        let a = sample_arrivals(&cluster.lambda_bps, cluster.tau_s, &mut arrival_rng);
        records.push(slot_record(&q, &r, &allocation, &a));
        q = queue_step(&q, &r, &a, cluster.tau_s);
    }
    Ok(Trace {
        tau_s: cluster.tau_s,
        records,
    })
}

/// Geometric horizon draw: T = 1 + (number of continues at probability μ).
fn draw_geometric(rng: &mut ChaCha8Rng, mu: f64) -> usize {
    let mut t = 1usize;
    while t < HORIZON_CAP && rng.random::<f64>() < mu {
        t += 1;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::CMat;
    use crate::model::{Allocation, ChannelRealization, ClusterConfig};
    use crate::priority::{PriorityTable, Regime, SolveWarnings, SolverParams, UserTable};
    use crate::sim::{build_fixed_policy, trial_seeds, SolverOptions};

    fn cluster() -> ClusterConfig<f64> {
        ClusterConfig {
            n: 2,
            w_hz: 2e6,
            tau_s: 1e-3,
            sigma2: 1.0,
            c_tot: 10.0,
            path_loss: vec![1.0, 0.1, 0.1, 1.0],
            p0_w: vec![10.0, 10.0],
            p_max_w: vec![100.0, 100.0],
            lambda_bps: vec![3e5, 3e5],
            beta: vec![1.0, 1.0],
            seed: 9,
        }
    }

    #[test]
    fn zero_arrivals_keep_queues_and_allocations_at_zero() {
        let mut cl = cluster();
        cl.lambda_bps = vec![0.0, 0.0];
        let opts = SolverOptions::for_cluster(&cl);
        let policy = build_fixed_policy(&cl, 1e-4, &opts).unwrap();
        let setup = TrialSetup {
            cluster: &cl,
            policy: &policy,
            horizon: Horizon::Fixed(200),
            q_init: vec![0.0, 0.0],
        };
        let trace = run_trial(&setup, trial_seeds(1, 0, 0)).unwrap();
        for rec in &trace.records {
            assert_eq!(rec.q, vec![0.0, 0.0]);
            assert_eq!(rec.c, vec![0.0, 0.0]);
            assert_eq!(rec.p_d, vec![0.0, 0.0]);
        }
    }

    #[test]
    fn fixed_seed_reproduces_the_trace_bit_for_bit() {
        let cl = cluster();
        let opts = SolverOptions::for_cluster(&cl);
        let policy = build_fixed_policy(&cl, 1e-4, &opts).unwrap();
        let setup = TrialSetup {
            cluster: &cl,
            policy: &policy,
            horizon: Horizon::Fixed(500),
            q_init: vec![0.0, 0.0],
        };
        let t1 = run_trial(&setup, trial_seeds(7, 3, 11)).unwrap();
        let t2 = run_trial(&setup, trial_seeds(7, 3, 11)).unwrap();
        assert_eq!(t1, t2);
        let t3 = run_trial(&setup, trial_seeds(7, 3, 12)).unwrap();
        assert_ne!(t1, t3);
    }

    #[test]
    fn three_slot_hand_simulation_matches() {
        // Scripted identity channel, a constant-J' table, and hand-computed
        // queue evolution over T = 3.
        let mut cl = cluster();
        cl.path_loss = vec![1.0, 0.0, 0.0, 1.0];
        cl.lambda_bps = vec![0.0, 0.0]; // no arrivals: pure drain
        let params = SolverParams::from_cluster(&cl, 1e-4, vec![1e-3, 1e-3]).unwrap();
        // alpha = 9 for user 0: with z = 1, x0 = 10, y = 80, C = log2(80),
        // rate = 1e6·log2(1 + 79/9).
        let jp = 2.0 * params.gamma * 9.0 / params.w_hz;
        let table = PriorityTable {
            regime: Regime::Average,
            power_controlled: false,
            users: vec![
                UserTable {
                    q: vec![0.0, 1.0],
                    jp: vec![jp, jp],
                },
                UserTable {
                    q: vec![0.0, 1.0],
                    jp: vec![0.0, 0.0],
                },
            ],
            c_inf: vec![0.0, 0.0],
            warnings: SolveWarnings::default(),
        };
        let policy = PolicyBundle {
            kind: PolicyKind::FixedPower,
            params,
            table,
            crosslink: None,
            policy_mu: 1.0,
            q_ref: vec![0.0, 0.0],
        };
        let setup = TrialSetup {
            cluster: &cl,
            policy: &policy,
            horizon: Horizon::Fixed(3),
            q_init: vec![4000.0, 0.0],
        };
        let trace = run_trial_with(&setup, trial_seeds(1, 0, 0), |_rng| {
            ChannelRealization::from_small_scale(CMat::identity(2), &cl)
        })
        .unwrap();

        // Hand computation: x0 = p0·|H|²/σ² = 10, fixed-power capacity
        // y = x0(α−1) = 80, C = log2(80), N = (10+1)/79, rate =
        // 1e6·log2(1 + 10/(N+1)) = 1e6·log2(1 + 79/9) ≈ 3.2895e6 bps,
        // drain per 1 ms slot ≈ 3289.5 bits.
        let y: f64 = 80.0;
        let c_expect = y.log2();
        let n_q = 11.0 / 79.0;
        let rate_expect = 1e6 * (1.0f64 + 10.0 / (n_q + 1.0)).log2();
        let drain = rate_expect * 1e-3;

        assert_eq!(trace.records.len(), 3);
        assert!((trace.records[0].c[0] - c_expect).abs() < 1e-12);
        assert!((trace.records[0].r_bps[0] - rate_expect).abs() < 1e-6);
        assert_eq!(trace.records[0].q[0], 4000.0);
        let q1 = (4000.0 - drain).max(0.0);
        assert!((trace.records[1].q[0] - q1).abs() < 1e-9);
        let q2 = (q1 - drain).max(0.0);
        assert!((trace.records[2].q[0] - q2).abs() < 1e-9);
        // User 2 has J' = 0: never allocated.
        for rec in &trace.records {
            assert_eq!(rec.c[1], 0.0);
        }
        let _ = Allocation::<f64>::zero(2);
    }

    #[test]
    fn geometric_horizon_mean_matches() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mu = 0.9;
        let n = 20_000;
        let mean: f64 = (0..n)
            .map(|_| draw_geometric(&mut rng, mu) as f64)
            .sum::<f64>()
            / n as f64;
        let expect = 1.0 / (1.0 - mu);
        assert!((mean - expect).abs() / expect < 0.03, "mean horizon {mean}");
    }
}
