//! Priority-function solvers for both MDP regimes.
//!
//! A solved [`PriorityTable`] holds the per-user derivative J'ᵢ(Qᵢ) of the
//! decomposed priority function on a backlog grid; together with the
//! cross-link correction constants it fully determines the per-slot
//! allocation policies. Time-average tables solve the stationary equation
//! with the optimal average-cost constant c∞; discounted tables solve the
//! implicit equation of the geometric-horizon regime.

mod closed_forms;
mod crosslink;
mod solver;

pub use closed_forms::{
    discounted_capacity_cost, discounted_rate, expected_capacity, expected_power_cost,
    expected_rate, thresholds, Thresholds,
};
pub use crosslink::{
    build_crosslink_set, crosslink_coeffs, crosslink_gradient_avg, crosslink_gradient_discounted,
    discounted_k_constant, priority_gradient_avg, CrossLinkCoeffs, CrossLinkSet, PairGradient,
};
pub use solver::{
    avg_residual_at, check_table_conditions, fixed_residual_at, solve_subpriority_avg,
    solve_subpriority_discounted, solve_subpriority_fixed_avg, solve_table_avg_fixed,
    solve_table_avg_joint, solve_table_discounted,
};

use crate::error::{Error, Result};
use crate::model::ClusterConfig;
use crate::numerics::Real;

/// Inputs of the table solvers: cluster physics plus the Lagrangian prices
/// and grid options.
#[derive(Debug, Clone)]
pub struct SolverParams<S> {
    pub n: usize,
    pub w_hz: S,
    pub tau_s: S,
    pub sigma2: S,
    /// Fronthaul price γ (cost per bit/s/Hz).
    pub gamma: S,
    /// Per-user dynamic-power price μᵢ (cost per watt).
    pub mu_power: Vec<S>,
    pub beta: Vec<S>,
    pub lambda_bps: Vec<S>,
    pub path_loss: Vec<S>,
    pub p0_w: Vec<S>,
    pub p_max_w: Vec<S>,
    /// Shared backlog grid override; per-user geometric grids otherwise.
    pub q_grid: Option<Vec<S>>,
    /// Geometric grid points above zero (default 256).
    pub grid_points: usize,
    /// Grid top as a multiple of the mean per-slot arrival (default 100).
    pub q_max_factor: S,
    /// Minimum α below which the large-α closed forms are flagged.
    pub alpha_guard: S,
    /// Per-user override of the optimal average cost constant c∞.
    pub c_inf_override: Option<Vec<S>>,
}

impl<S: Real> SolverParams<S> {
    pub fn from_cluster(cluster: &ClusterConfig<S>, gamma: S, mu_power: Vec<S>) -> Result<Self> {
        cluster.validate()?;
        if !(gamma > S::zero()) {
            return Err(Error::Config(format!("gamma must be > 0, got {gamma}")));
        }
        if mu_power.len() != cluster.n {
            return Err(Error::Config("mu_power length must equal cluster size".into()));
        }
        for (i, m) in mu_power.iter().enumerate() {
            if !(*m >= S::zero()) {
                return Err(Error::Config(format!("mu_power[{i}] must be >= 0")));
            }
        }
        Ok(Self {
            n: cluster.n,
            w_hz: cluster.w_hz,
            tau_s: cluster.tau_s,
            sigma2: cluster.sigma2,
            gamma,
            mu_power,
            beta: cluster.beta.clone(),
            lambda_bps: cluster.lambda_bps.clone(),
            path_loss: cluster.path_loss.clone(),
            p0_w: cluster.p0_w.clone(),
            p_max_w: cluster.p_max_w.clone(),
            q_grid: None,
            grid_points: 256,
            q_max_factor: S::of(100.0),
            alpha_guard: S::of(10.0),
            c_inf_override: None,
        })
    }

    pub fn l(&self, i: usize, j: usize) -> S {
        self.path_loss[i * self.n + j]
    }

    /// aᵢ = σ²/(p₀ᵢ·Lᵢᵢ), the normalized inverse SNR of the straight link.
    pub fn a(&self, i: usize) -> S {
        self.sigma2 / (self.p0_w[i] * self.l(i, i))
    }

    /// bᵢ = γ·Lᵢᵢ/(μᵢ·σ²·ln 2); kᵢ = bᵢ·z.
    pub fn b(&self, i: usize) -> S {
        self.gamma * self.l(i, i) / (self.mu_power[i] * self.sigma2 * S::LN_2())
    }

    /// Default c∞ᵢ = 2γλᵢ/W: the boundary choice that gives an empty queue
    /// zero allocation (α = 1 at Q = 0).
    pub fn c_inf(&self, user: usize) -> S {
        match &self.c_inf_override {
            Some(v) => v[user],
            None => S::of(2.0) * self.gamma * self.lambda_bps[user] / self.w_hz,
        }
    }

    /// Backlog grid for one user: 0 plus `grid_points` geometrically spaced
    /// points up to `q_max_factor` mean per-slot arrivals (four decades).
    pub fn q_grid_for_user(&self, user: usize) -> Vec<S> {
        if let Some(g) = &self.q_grid {
            return g.clone();
        }
        let mean_arrival = (self.lambda_bps[user] * self.tau_s).max(S::of(1.0));
        let q_max = self.q_max_factor * mean_arrival;
        let q_min = q_max * S::of(1e-4);
        let m = self.grid_points.max(2);
        let ratio = (q_max / q_min).powf(S::one() / S::of((m - 1) as f64));
        let mut grid = Vec::with_capacity(m + 1);
        grid.push(S::zero());
        let mut q = q_min;
        for _ in 0..m {
            grid.push(q);
            q = q * ratio;
        }
        let last = grid.len() - 1;
        grid[last] = q_max;
        grid
    }
}

/// MDP regime a table was solved for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regime<S> {
    Average,
    Discounted { mu: S },
}

impl<S: Real> Regime<S> {
    pub fn label(&self) -> &'static str {
        match self {
            Regime::Average => "average",
            Regime::Discounted { .. } => "discounted",
        }
    }
}

/// One user's solved sub-priority derivative on its backlog grid.
#[derive(Debug, Clone)]
pub struct UserTable<S> {
    pub q: Vec<S>,
    pub jp: Vec<S>,
}

impl<S: Real> UserTable<S> {
    /// Linear interpolation inside the grid, last-segment linear
    /// extrapolation beyond it. Backlogs are never negative.
    pub fn interpolate(&self, q: S) -> S {
        let n = self.q.len();
        debug_assert!(n >= 2);
        if q <= self.q[0] {
            return self.jp[0];
        }
        if q >= self.q[n - 1] {
            let slope = (self.jp[n - 1] - self.jp[n - 2]) / (self.q[n - 1] - self.q[n - 2]);
            return self.jp[n - 1] + slope * (q - self.q[n - 1]);
        }
        // Binary search for the segment containing q.
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.q[mid] <= q {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = (q - self.q[lo]) / (self.q[hi] - self.q[lo]);
        self.jp[lo] + (self.jp[hi] - self.jp[lo]) * t
    }
}

/// Counters for approximation-quality events during a table solve.
#[derive(Debug, Clone, Copy, Default)]
pub struct SolveWarnings {
    /// Grid points whose solved α fell below `alpha_guard`.
    pub below_guard: usize,
    /// Closed-form evaluations that fell back to Monte-Carlo integration.
    pub mc_fallbacks: usize,
}

/// The solved "brain" of a policy: per-user J' arrays plus regime metadata.
#[derive(Debug, Clone)]
pub struct PriorityTable<S> {
    pub regime: Regime<S>,
    /// Whether the table was solved with dynamic power control in the cost.
    pub power_controlled: bool,
    pub users: Vec<UserTable<S>>,
    /// Per-user c∞ (average regime; zero in the discounted regime).
    pub c_inf: Vec<S>,
    pub warnings: SolveWarnings,
}

impl<S: Real> PriorityTable<S> {
    /// α for one user at backlog q under the average regime definition
    /// α = W·J'(q)/(2γ).
    pub fn alpha(&self, user: usize, q: S, params: &SolverParams<S>) -> S {
        params.w_hz * self.users[user].interpolate(q) / (S::of(2.0) * params.gamma)
    }

    /// CSV with columns `user,Q_bits,Jprime,regime,c_inf_or_mu`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("user,Q_bits,Jprime,regime,c_inf_or_mu\n");
        for (i, ut) in self.users.iter().enumerate() {
            let tag = match self.regime {
                Regime::Average => self.c_inf[i],
                Regime::Discounted { mu } => mu,
            };
            for (q, jp) in ut.q.iter().zip(&ut.jp) {
                out.push_str(&format!("{i},{q},{jp},{},{tag}\n", self.regime.label()));
            }
        }
        out
    }

    /// Rebuilds a table from [`Self::to_csv`] output. The power-control flag
    /// is not part of the schema and must be supplied by the caller.
    pub fn from_csv(text: &str, power_controlled: bool) -> Result<Self> {
        let mut users: Vec<UserTable<S>> = Vec::new();
        let mut c_inf: Vec<S> = Vec::new();
        let mut regime: Option<Regime<S>> = None;
        for (lineno, line) in text.lines().enumerate() {
            if lineno == 0 || line.is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 5 {
                return Err(Error::Config(format!(
                    "priority CSV line {lineno}: expected 5 fields, got {}",
                    fields.len()
                )));
            }
            let user: usize = fields[0]
                .parse()
                .map_err(|_| Error::Config(format!("bad user index on line {lineno}")))?;
            let parse = |s: &str| -> Result<S> {
                s.parse::<f64>()
                    .map(S::of)
                    .map_err(|_| Error::Config(format!("bad number on line {lineno}")))
            };
            let q = parse(fields[1])?;
            let jp = parse(fields[2])?;
            let tag = parse(fields[4])?;
            let this_regime = match fields[3] {
                "average" => Regime::Average,
                "discounted" => Regime::Discounted { mu: tag },
                other => return Err(Error::Config(format!("unknown regime '{other}'"))),
            };
            match regime {
                None => regime = Some(this_regime),
                Some(r) if r == this_regime => {}
                _ => return Err(Error::Config("mixed regimes in priority CSV".into())),
            }
            while users.len() <= user {
                users.push(UserTable {
                    q: Vec::new(),
                    jp: Vec::new(),
                });
                c_inf.push(S::zero());
            }
            users[user].q.push(q);
            users[user].jp.push(jp);
            if matches!(this_regime, Regime::Average) {
                c_inf[user] = tag;
            }
        }
        let regime = regime.ok_or_else(|| Error::Config("empty priority CSV".into()))?;
        Ok(Self {
            regime,
            power_controlled,
            users,
            c_inf,
            warnings: SolveWarnings::default(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ClusterConfig;

    pub(crate) fn test_cluster() -> ClusterConfig<f64> {
        ClusterConfig {
            n: 2,
            w_hz: 2e6,
            tau_s: 1e-3,
            sigma2: 1.0,
            c_tot: 10.0,
            path_loss: vec![1.0, 0.1, 0.1, 1.0],
            p0_w: vec![10.0, 10.0],
            p_max_w: vec![100.0, 100.0],
            lambda_bps: vec![4e5, 4e5],
            beta: vec![1.0, 1.0],
            seed: 1,
        }
    }

    #[test]
    fn grid_starts_at_zero_and_is_increasing() {
        let params = SolverParams::from_cluster(&test_cluster(), 1e-4, vec![1e-3, 1e-3]).unwrap();
        let grid = params.q_grid_for_user(0);
        assert_eq!(grid[0], 0.0);
        assert_eq!(grid.len(), 257);
        for w in grid.windows(2) {
            assert!(w[1] > w[0]);
        }
        let q_max = 100.0 * 4e5 * 1e-3;
        assert!((grid[256] - q_max).abs() < 1e-9 * q_max);
    }

    #[test]
    fn interpolation_is_exact_on_nodes_and_extrapolates_linearly() {
        let ut = UserTable::<f64> {
            q: vec![0.0, 1.0, 3.0],
            jp: vec![2.0, 4.0, 5.0],
        };
        assert_eq!(ut.interpolate(0.0), 2.0);
        assert_eq!(ut.interpolate(1.0), 4.0);
        assert_eq!(ut.interpolate(3.0), 5.0);
        assert!((ut.interpolate(0.5) - 3.0).abs() < 1e-12);
        // Beyond the grid: slope of the last segment is 0.5.
        assert!((ut.interpolate(5.0) - 6.0).abs() < 1e-12);
    }

    #[test]
    fn csv_round_trip_preserves_tables() {
        let table = PriorityTable {
            regime: Regime::Average,
            power_controlled: true,
            users: vec![UserTable {
                q: vec![0.0, 1.5, 2.5],
                jp: vec![0.1, 0.2, 0.3],
            }],
            c_inf: vec![0.42],
            warnings: SolveWarnings::default(),
        };
        let csv = table.to_csv();
        let back = PriorityTable::<f64>::from_csv(&csv, true).unwrap();
        assert_eq!(back.users[0].q, table.users[0].q);
        assert_eq!(back.users[0].jp, table.users[0].jp);
        assert_eq!(back.c_inf[0], 0.42);
        assert_eq!(back.regime, Regime::Average);
    }
}
