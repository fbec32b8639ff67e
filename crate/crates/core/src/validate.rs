//! Self-check suites comparing every closed form against its independent
//! oracle: quadrature for the exponential integral, Monte-Carlo averages of
//! per-realization optima for the expectation formulas, the numeric
//! minimizer for the allocation rule, and exact policy evaluation for the
//! geometric-horizon equivalence.

use crate::allocator::{allocate_joint, allocate_numeric, allocation_objective, SlotContext};
use crate::model::{sample_channel, ClusterConfig};
use crate::numerics::exp_integral_e1;
use crate::oracles;
use crate::priority::{
    discounted_capacity_cost, discounted_rate, expected_capacity, expected_power_cost,
    expected_rate, PriorityTable, Regime, SolveWarnings, SolverParams, UserTable,
};
use crate::sim::lemma2::{lemma2_check, ToyMdp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Suite depth: `Fast` finishes in seconds, `Full` runs the million-sample
/// oracles.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Fast,
    Full,
}

/// One check's outcome.
#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

/// The validation suite. The exponential-integral implementation under test
/// is injectable so the suite itself can be mutation-tested.
pub struct ValidationSuite {
    pub level: Level,
    e1_impl: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ValidationSuite {
    pub fn new(level: Level) -> Self {
        Self {
            level,
            e1_impl: Box::new(|z| exp_integral_e1(z).expect("positive argument")),
        }
    }

    /// Replaces the E₁ implementation under test (mutation checks).
    pub fn with_e1(mut self, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        self.e1_impl = Box::new(f);
        self
    }

    /// Runs all checks and returns their outcomes.
    pub fn run(&self) -> Vec<CheckResult> {
        let mut out = Vec::new();
        out.push(self.check_e1_accuracy());
        out.extend(self.check_expectation_oracles());
        out.push(self.check_allocator_against_numeric());
        out.extend(self.check_lemma2());
        out
    }

    fn mc_samples(&self) -> usize {
        match self.level {
            Level::Fast => 100_000,
            Level::Full => 1_000_000,
        }
    }

    fn check_e1_accuracy(&self) -> CheckResult {
        let points = match self.level {
            Level::Fast => 120,
            Level::Full => 1_200,
        };
        let mut worst: f64 = 0.0;
        let mut worst_z = 0.0;
        for k in 0..points {
            let z = 10f64.powf(-6.0 + 8.8 * k as f64 / (points - 1) as f64);
            if z > 700.0 {
                continue;
            }
            let got = (self.e1_impl)(z);
            let oracle = oracles::e1_quadrature(z);
            let rel = ((got - oracle) / oracle).abs();
            if rel > worst {
                worst = rel;
                worst_z = z;
            }
        }
        CheckResult {
            name: "e1_vs_quadrature".into(),
            pass: worst < 1e-10,
            detail: format!("worst relative error {worst:.3e} at z = {worst_z:.3e}"),
        }
    }

    fn unit_params(&self) -> SolverParams<f64> {
        let cluster = ClusterConfig {
            n: 1,
            w_hz: 2e6,
            tau_s: 1e-3,
            sigma2: 1.0,
            c_tot: 10.0,
            path_loss: vec![1.0],
            p0_w: vec![1.0],
            p_max_w: vec![100.0],
            lambda_bps: vec![1e5],
            beta: vec![1.0],
            seed: 0,
        };
        SolverParams::from_cluster(&cluster, 1.0, vec![1.0]).unwrap()
    }

    fn check_expectation_oracles(&self) -> Vec<CheckResult> {
        let params = self.unit_params();
        let u = oracles::UserPhysics {
            gamma: params.gamma,
            mu_power: params.mu_power[0],
            sigma2: params.sigma2,
            l_ii: params.l(0, 0),
            p0: params.p0_w[0],
            w_hz: params.w_hz,
        };
        let tol = match self.level {
            Level::Fast => 0.03,
            Level::Full => 0.02,
        };
        let zs = oracles::exp1_sample(self.mc_samples(), 0xabcd);
        let mut out = Vec::new();
        for alpha in [50.0, 100.0, 200.0] {
            let (mc_p, mc_c, mc_r) = oracles::mc_joint_expectations(&zs, alpha, u);
            let ep = expected_power_cost(alpha, &params, 0);
            let (ec, _) = expected_capacity(alpha, &params, 0);
            let (er, _) = expected_rate(alpha, &params, 0);
            let (mc_fc, mc_fr) = oracles::mc_fixed_expectations(&zs, alpha, u);
            let fc = discounted_capacity_cost(params.gamma * alpha, &params, 0);
            let fr = discounted_rate(params.gamma * alpha, &params, 0);
            for (name, closed, mc) in [
                ("power_cost", ep, mc_p),
                ("capacity", ec, mc_c),
                ("rate", er, mc_r),
                ("fixed_capacity_cost", fc, mc_fc),
                ("fixed_rate", fr, mc_fr),
            ] {
                let rel = ((closed - mc) / mc).abs();
                out.push(CheckResult {
                    name: format!("expectation_{name}_alpha{alpha:.0}"),
                    pass: rel < tol,
                    detail: format!("closed {closed:.6e} vs MC {mc:.6e} (rel {rel:.4})"),
                });
            }
        }
        out
    }

    fn check_allocator_against_numeric(&self) -> CheckResult {
        let draws = match self.level {
            Level::Fast => 100,
            Level::Full => 1_000,
        };
        let cluster = ClusterConfig {
            n: 2,
            w_hz: 2e6,
            tau_s: 1e-3,
            sigma2: 1.0,
            c_tot: 10.0,
            path_loss: vec![1.0, 0.0, 0.0, 1.0],
            p0_w: vec![10.0, 10.0],
            p_max_w: vec![200.0, 200.0],
            lambda_bps: vec![4e5, 4e5],
            beta: vec![1.0, 1.0],
            seed: 0,
        };
        let params = SolverParams::from_cluster(&cluster, 1e-4, vec![1e-3, 1e-3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x600d);
        let mut worst: f64 = 0.0;
        for _ in 0..draws {
            let alphas = [
                10.0 + 290.0 * rng.random::<f64>(),
                10.0 + 290.0 * rng.random::<f64>(),
            ];
            let users = alphas
                .iter()
                .map(|&alpha| {
                    let jp = 2.0 * params.gamma * alpha / params.w_hz;
                    UserTable {
                        q: vec![0.0, 1e9],
                        jp: vec![jp, jp],
                    }
                })
                .collect();
            let table = PriorityTable {
                regime: Regime::Average,
                power_controlled: true,
                users,
                c_inf: vec![0.0, 0.0],
                warnings: SolveWarnings::default(),
            };
            let channel = sample_channel(&cluster, &mut rng).unwrap();
            let q = [rng.random::<f64>() * 1e4, rng.random::<f64>() * 1e4];
            let ctx = SlotContext {
                channel: &channel,
                q: &q,
                table: &table,
                crosslink: None,
                params: &params,
            };
            let weights = ctx.rate_weights();
            let (closed, _) = allocate_joint(&ctx);
            let closed_obj = allocation_objective(&ctx, &closed, &weights);
            let numeric = allocate_numeric(&ctx);
            let rel = (closed_obj - numeric.objective) / numeric.objective.abs().max(1e-9);
            worst = worst.max(rel);
        }
        CheckResult {
            name: "joint_allocator_vs_numeric".into(),
            pass: worst < 0.01,
            detail: format!("worst relative objective excess {worst:.4e} over {draws} draws"),
        }
    }

    fn check_lemma2(&self) -> Vec<CheckResult> {
        let trials = match self.level {
            Level::Fast => 20_000,
            Level::Full => 100_000,
        };
        let mut out = Vec::new();
        for (k, mu) in [0.3, 0.5, 0.9].into_iter().enumerate() {
            let toy = ToyMdp::random(3, 2, 40 + k as u64);
            let policy = [k % 2, (k + 1) % 2, 0];
            let start = [0.4, 0.3, 0.3];
            match lemma2_check(&toy, &policy, mu, trials, &start, 1000 + k as u64) {
                Ok(report) => out.push(CheckResult {
                    name: format!("lemma2_mu{mu}"),
                    pass: report.gap_se < 3.0,
                    detail: format!(
                        "MC {:.6} vs exact {:.6} ({:.2} SE)",
                        report.mc_mean, report.exact, report.gap_se
                    ),
                }),
                Err(err) => out.push(CheckResult {
                    name: format!("lemma2_mu{mu}"),
                    pass: false,
                    detail: err.to_string(),
                }),
            }
        }
        out
    }
}
