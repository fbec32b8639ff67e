//! Root-finding drivers that turn the implicit priority equations into
//! tables of J'(Q) over the backlog grid.
//!
//! Both regimes reduce to a one-dimensional root per grid point. The
//! average-reward joint equation is solved in J' directly; the fixed-power
//! equations (discounted, and the time-average baseline with its c∞ shift)
//! are solved in the effective multiplier s = μ·(W/2)·J', in which the
//! discounted equation is μ-free. Roots are bracketed by a geometric scan
//! that starts from the previous grid point's root — the residual there is
//! β·ΔQ/λ > 0, so the scan only ever has to walk upward, which also makes
//! the solved table nondecreasing by construction.

use super::closed_forms::{
    discounted_capacity_cost, discounted_rate, expected_capacity, expected_power_cost,
    expected_rate,
};
use super::{PriorityTable, Regime, SolveWarnings, SolverParams, UserTable};
use crate::error::{Error, Result};
use crate::numerics::{root_find_monotone, Bracket, Real};

/// Multiplicative step of the bracket scan.
const SCAN_FACTOR: f64 = 1.25;
/// Give up once α (or s/γ) exceeds this during bracketing.
const SCAN_CAP: f64 = 1e15;
/// Relative interval tolerance handed to the root finder.
const ROOT_TOL: f64 = 1e-12;

/// Average-reward residual of the joint (power-controlled) equation at one
/// grid point, as a function of J'.
fn avg_joint_residual<S: Real>(
    jp: S,
    q: S,
    params: &SolverParams<S>,
    user: usize,
    c_inf: S,
    warn: &mut SolveWarnings,
) -> S {
    let alpha = params.w_hz * jp / (S::of(2.0) * params.gamma);
    let (ec, fb1) = expected_capacity(alpha, params, user);
    let (er, fb2) = expected_rate(alpha, params, user);
    let ep = expected_power_cost(alpha, params, user);
    if fb1 || fb2 {
        warn.mc_fallbacks += 1;
    }
    let lambda = params.lambda_bps[user];
    params.beta[user] * q / lambda + params.gamma * ec + ep + jp * (lambda - er) - c_inf
}

/// Fixed-power residual in the effective multiplier s = μ·(W/2)·J'. Handles
/// the zero-allocation branch s ≤ γ, where both expectations vanish.
fn fixed_power_residual<S: Real>(s: S, q: S, params: &SolverParams<S>, user: usize, c_inf: S) -> S {
    let lambda = params.lambda_bps[user];
    let two_over_w = S::of(2.0) / params.w_hz;
    let base = params.beta[user] * q / lambda + two_over_w * lambda * s - c_inf;
    if s <= params.gamma {
        return base;
    }
    base + discounted_capacity_cost(s, params, user)
        - two_over_w * s * discounted_rate(s, params, user)
}

/// Walks `x` upward from `lo` by [`SCAN_FACTOR`] until the residual changes
/// sign, then polishes with the monotone root finder.
///
/// `lo` is the previous grid point's root, where the residual is
/// β·ΔQ/λ ≥ 0 up to the solve tolerance; a nonpositive start is accepted
/// as the root outright. The refinement tolerance scales with the root
/// magnitude (priority derivatives are ~γ/W-sized, far below 1).
fn scan_and_solve<S: Real, F: FnMut(S) -> S>(
    mut f: F,
    lo: S,
    user: usize,
    q: S,
    cap: S,
) -> Result<S> {
    let f_lo = f(lo);
    if !f_lo.is_finite() {
        return Err(Error::NoRoot {
            user,
            q_bits: q.as_f64(),
            detail: format!("non-finite residual at the scan start {lo:e}"),
        });
    }
    if f_lo <= S::zero() {
        return Ok(lo);
    }
    let mut prev = lo;
    let mut f_prev = f_lo;
    let mut x = lo * S::of(SCAN_FACTOR);
    loop {
        if x > cap {
            return Err(Error::NoRoot {
                user,
                q_bits: q.as_f64(),
                detail: format!(
                    "no sign change while scanning up to {cap:e}; residual stuck at {f_prev:e}"
                ),
            });
        }
        let fx = f(x);
        if !fx.is_finite() {
            return Err(Error::NoRoot {
                user,
                q_bits: q.as_f64(),
                detail: format!("non-finite residual at {x:e}"),
            });
        }
        if fx == S::zero() {
            return Ok(x);
        }
        if (fx > S::zero()) != (f_prev > S::zero()) {
            let bracket = Bracket::new(prev, x, f_prev, fx)?;
            let tol = S::of(ROOT_TOL) * prev.abs().max(S::min_positive_value());
            return Ok(root_find_monotone(f, bracket, tol));
        }
        prev = x;
        f_prev = fx;
        x = x * S::of(SCAN_FACTOR);
    }
}

/// Solves J'ᵢ on the backlog grid for the average-reward joint policy.
pub fn solve_subpriority_avg<S: Real>(
    params: &SolverParams<S>,
    user: usize,
) -> Result<(UserTable<S>, S, SolveWarnings)> {
    let grid = params.q_grid_for_user(user);
    let lambda = params.lambda_bps[user];
    let gamma = params.gamma;
    let boundary = S::of(2.0) * gamma / params.w_hz; // J' at α = 1
    let mut warn = SolveWarnings::default();

    if !(lambda > S::zero()) {
        // A user with no traffic never receives an allocation.
        let jp = vec![boundary; grid.len()];
        return Ok((UserTable { q: grid, jp }, S::zero(), warn));
    }
    let c_inf = params.c_inf(user);
    let jp_cap = boundary * S::of(SCAN_CAP);
    let mut jp = Vec::with_capacity(grid.len());
    let default_c_inf = params.c_inf_override.is_none();

    for &q in &grid {
        if q == S::zero() && default_c_inf {
            // Boundary construction: all expectation terms vanish at α = 1
            // and c∞ = 2γλ/W makes the equation hold exactly.
            jp.push(boundary);
            continue;
        }
        let lo = jp.last().copied().unwrap_or(boundary).max(boundary);
        let root = scan_and_solve(
            |x| avg_joint_residual(x, q, params, user, c_inf, &mut warn),
            lo,
            user,
            q,
            jp_cap,
        )?;
        let alpha = params.w_hz * root / (S::of(2.0) * gamma);
        if alpha < params.alpha_guard {
            warn.below_guard += 1;
        }
        jp.push(root);
    }
    let table = UserTable { q: grid, jp };
    check_table_monotone(&table, user)?;
    Ok((table, c_inf, warn))
}

/// Solves J'ᵢ for the discounted regime at continue-probability `mu`.
///
/// Works on the branch μ(W/2)J' > γ; a grid point with no root there is
/// reported infeasible rather than admitting a decreasing J'.
pub fn solve_subpriority_discounted<S: Real>(
    params: &SolverParams<S>,
    user: usize,
    mu: S,
) -> Result<(UserTable<S>, SolveWarnings)> {
    if !(mu > S::zero() && mu < S::one()) {
        return Err(Error::Config(format!("discount must lie in (0,1), got {mu}")));
    }
    let (table, warn) = solve_fixed_family(params, user, S::zero())?;
    // Convert the effective multiplier s back to J' = 2s/(μW).
    let jp = table
        .jp
        .iter()
        .map(|&s| S::of(2.0) * s / (mu * params.w_hz))
        .collect();
    let table = UserTable { q: table.q, jp };
    check_table_monotone(&table, user)?;
    Ok((table, warn))
}

/// Solves J'ᵢ for the time-average fixed-power baseline (the same implicit
/// equation at μ = 1 with the average-cost constant c∞ subtracted).
pub fn solve_subpriority_fixed_avg<S: Real>(
    params: &SolverParams<S>,
    user: usize,
) -> Result<(UserTable<S>, S, SolveWarnings)> {
    let c_inf = if params.lambda_bps[user] > S::zero() {
        params.c_inf(user)
    } else {
        S::zero()
    };
    let (table, warn) = solve_fixed_family(params, user, c_inf)?;
    let jp = table
        .jp
        .iter()
        .map(|&s| S::of(2.0) * s / params.w_hz)
        .collect();
    let table = UserTable { q: table.q, jp };
    check_table_monotone(&table, user)?;
    Ok((table, c_inf, warn))
}

/// Shared fixed-power solve in s-space. `c_inf = 0` gives the discounted
/// equation (μ-free in s); the boundary root at Q = 0 is s = 0 there and
/// s = γ for the average baseline.
fn solve_fixed_family<S: Real>(
    params: &SolverParams<S>,
    user: usize,
    c_inf: S,
) -> Result<(UserTable<S>, SolveWarnings)> {
    let grid = params.q_grid_for_user(user);
    let lambda = params.lambda_bps[user];
    let gamma = params.gamma;
    let mut warn = SolveWarnings::default();

    if !(lambda > S::zero()) {
        let s = if c_inf > S::zero() { gamma } else { S::zero() };
        let jp = vec![s; grid.len()];
        return Ok((UserTable { q: grid, jp }, warn));
    }

    let discounted = c_inf == S::zero();
    let mut s_vals: Vec<S> = Vec::with_capacity(grid.len());
    let cap = gamma * S::of(SCAN_CAP);
    for &q in &grid {
        if q == S::zero() {
            // Zero-allocation branch: every term of the implicit equation
            // vanishes at s = 0 (discounted) or s = γ (average with the
            // default c∞).
            s_vals.push(if discounted { S::zero() } else { gamma });
            continue;
        }
        let lo = s_vals.last().copied().unwrap_or(S::zero()).max(gamma);
        let root = scan_and_solve(
            |s| fixed_power_residual(s, q, params, user, c_inf),
            lo,
            user,
            q,
            cap,
        )?;
        if root / gamma < params.alpha_guard {
            warn.below_guard += 1;
        }
        s_vals.push(root);
    }
    Ok((
        UserTable {
            q: grid,
            jp: s_vals,
        },
        warn,
    ))
}

/// Monotonicity and finiteness of a solved table; runs after every solve.
fn check_table_monotone<S: Real>(table: &UserTable<S>, user: usize) -> Result<()> {
    let n = table.q.len();
    let scale = table.jp[n - 1].abs().max(S::of(1e-300));
    for k in 1..n {
        if table.jp[k] < table.jp[k - 1] - scale * S::of(1e-9) {
            return Err(Error::TableInvariant {
                user,
                detail: format!(
                    "J' decreases between grid points {} and {k}: {} -> {}",
                    k - 1,
                    table.jp[k - 1],
                    table.jp[k]
                ),
            });
        }
        if !table.jp[k].is_finite() {
            return Err(Error::TableInvariant {
                user,
                detail: format!("non-finite J' at grid point {k}"),
            });
        }
    }
    Ok(())
}

/// Asserts the Theorem-style admissibility conditions on a solved table:
/// J' nondecreasing over the grid, and at most linear growth on the grid
/// tail (the witness that J = O(Q²)), measured as the least-squares
/// log-log slope of J' over the top quarter of the grid.
pub fn check_table_conditions<S: Real>(table: &UserTable<S>, user: usize) -> Result<()> {
    check_table_monotone(table, user)?;
    let n = table.q.len();
    if table.jp[n - 1] <= S::zero() || table.q[n - 1] <= S::zero() {
        return Ok(());
    }
    let start = (3 * n / 4).clamp(1, n - 2);
    let pts: Vec<(f64, f64)> = table.q[start..]
        .iter()
        .zip(&table.jp[start..])
        .filter(|(&q, &jp)| q > S::zero() && jp > S::zero())
        .map(|(&q, &jp)| (q.as_f64().ln(), jp.as_f64().ln()))
        .collect();
    if pts.len() < 4 {
        return Ok(());
    }
    let m = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = m * sxx - sx * sx;
    if denom <= 0.0 {
        return Ok(());
    }
    let slope = (m * sxy - sx * sy) / denom;
    if slope > 1.25 {
        return Err(Error::TableInvariant {
            user,
            detail: format!("superlinear tail growth: log-log slope {slope:.3} over the grid tail"),
        });
    }
    Ok(())
}

/// Solves the full average-reward joint table (all users).
pub fn solve_table_avg_joint<S: Real>(params: &SolverParams<S>) -> Result<PriorityTable<S>> {
    let mut users = Vec::with_capacity(params.n);
    let mut c_inf = Vec::with_capacity(params.n);
    let mut warnings = SolveWarnings::default();
    for user in 0..params.n {
        let (ut, ci, warn) = solve_subpriority_avg(params, user)?;
        users.push(ut);
        c_inf.push(ci);
        warnings.below_guard += warn.below_guard;
        warnings.mc_fallbacks += warn.mc_fallbacks;
    }
    Ok(PriorityTable {
        regime: Regime::Average,
        power_controlled: true,
        users,
        c_inf,
        warnings,
    })
}

/// Solves the full time-average fixed-power table.
pub fn solve_table_avg_fixed<S: Real>(params: &SolverParams<S>) -> Result<PriorityTable<S>> {
    let mut users = Vec::with_capacity(params.n);
    let mut c_inf = Vec::with_capacity(params.n);
    let mut warnings = SolveWarnings::default();
    for user in 0..params.n {
        let (ut, ci, warn) = solve_subpriority_fixed_avg(params, user)?;
        users.push(ut);
        c_inf.push(ci);
        warnings.below_guard += warn.below_guard;
        warnings.mc_fallbacks += warn.mc_fallbacks;
    }
    Ok(PriorityTable {
        regime: Regime::Average,
        power_controlled: false,
        users,
        c_inf,
        warnings,
    })
}

/// Solves the full discounted table at continue-probability `mu`.
pub fn solve_table_discounted<S: Real>(params: &SolverParams<S>, mu: S) -> Result<PriorityTable<S>> {
    let mut users = Vec::with_capacity(params.n);
    let mut warnings = SolveWarnings::default();
    for user in 0..params.n {
        let (ut, warn) = solve_subpriority_discounted(params, user, mu)?;
        users.push(ut);
        warnings.below_guard += warn.below_guard;
        warnings.mc_fallbacks += warn.mc_fallbacks;
    }
    Ok(PriorityTable {
        regime: Regime::Discounted { mu },
        power_controlled: false,
        users,
        c_inf: vec![S::zero(); params.n],
        warnings,
    })
}

/// Residual of the average-reward joint equation at a given (Q, J') pair,
/// exposed for residual checks. All expectation terms follow the
/// zero-allocation branch below α = 1.
pub fn avg_residual_at<S: Real>(params: &SolverParams<S>, user: usize, q: S, jp: S, c_inf: S) -> S {
    let mut warn = SolveWarnings::default();
    avg_joint_residual(jp, q, params, user, c_inf, &mut warn)
}

/// Residual of the fixed-power implicit equation at (Q, J') for discount
/// `mu` (`mu = 1` with a nonzero `c_inf` gives the time-average baseline).
pub fn fixed_residual_at<S: Real>(
    params: &SolverParams<S>,
    user: usize,
    q: S,
    jp: S,
    mu: S,
    c_inf: S,
) -> S {
    let s = mu * params.w_hz * jp * S::of(0.5);
    let lambda = params.lambda_bps[user];
    // Rewrite in J' to keep the reported residual in the equation's printed
    // units: βQ/λ + E[γC*] + μJ'λ − μJ'E[R⁰] − c∞.
    let base = params.beta[user] * q / lambda + mu * jp * lambda - c_inf;
    if s <= params.gamma {
        return base;
    }
    base + discounted_capacity_cost(s, params, user) - mu * jp * discounted_rate(s, params, user)
}

#[cfg(test)]
mod tests {
    use super::super::tests::test_cluster;
    use super::*;
    use crate::oracles;

    fn params() -> SolverParams<f64> {
        SolverParams::from_cluster(&test_cluster(), 1e-4, vec![1e-3, 1e-3]).unwrap()
    }

    #[test]
    fn avg_boundary_point_is_exact() {
        let p = params();
        let (table, c_inf, _) = solve_subpriority_avg(&p, 0).unwrap();
        let boundary = 2.0 * p.gamma / p.w_hz;
        assert_eq!(table.jp[0], boundary);
        assert!((c_inf - 2.0 * p.gamma * p.lambda_bps[0] / p.w_hz).abs() < 1e-18);
        // Equation holds at the boundary by construction.
        let r = avg_residual_at(&p, 0, 0.0, boundary, c_inf);
        assert!(r.abs() < 1e-15);
    }

    #[test]
    fn avg_table_is_nondecreasing_with_small_residuals() {
        let p = params();
        let (table, c_inf, _) = solve_subpriority_avg(&p, 0).unwrap();
        for w in table.jp.windows(2) {
            assert!(w[1] >= w[0]);
        }
        for (k, (&q, &jp)) in table.q.iter().zip(&table.jp).enumerate().skip(1) {
            let r = avg_residual_at(&p, 0, q, jp, c_inf);
            let scale = (p.beta[0] * q / p.lambda_bps[0]).abs().max(c_inf).max(1e-300);
            assert!(
                (r / scale).abs() < 1e-8,
                "normalized residual {:e} at grid point {k}",
                r / scale
            );
        }
    }

    #[test]
    fn avg_roots_match_dense_scan_oracle() {
        let p = params();
        let (table, c_inf, _) = solve_subpriority_avg(&p, 0).unwrap();
        let boundary = 2.0 * p.gamma / p.w_hz;
        for &k in &[32usize, 128, 200, 256] {
            let q = table.q[k];
            let got = table.jp[k];
            let oracle = oracles::dense_scan_root(
                |jp| avg_residual_at(&p, 0, q, jp, c_inf),
                boundary * (1.0 + 1e-9),
                got * 4.0,
                20_000,
            )
            .expect("oracle root");
            assert!(
                ((got - oracle) / oracle).abs() < 1e-6,
                "grid {k}: solver {got:e} vs dense scan {oracle:e}"
            );
        }
    }

    #[test]
    fn discounted_boundary_and_monotonicity() {
        let p = params();
        for mu in [0.3, 0.7, 0.95] {
            let (table, _) = solve_subpriority_discounted(&p, 0, mu).unwrap();
            assert_eq!(table.jp[0], 0.0);
            for w in table.jp.windows(2) {
                assert!(w[1] >= w[0]);
            }
            for (&q, &jp) in table.q.iter().zip(&table.jp) {
                let r = fixed_residual_at(&p, 0, q, jp, mu, 0.0);
                let scale = (p.beta[0] * q / p.lambda_bps[0]).abs().max(1e-300);
                assert!((r / scale.max(1.0)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn discounted_roots_match_dense_scan_oracle() {
        let p = params();
        let mu = 0.6;
        let (table, _) = solve_subpriority_discounted(&p, 0, mu).unwrap();
        for &k in &[16usize, 100, 256] {
            let q = table.q[k];
            let got = table.jp[k];
            let oracle = oracles::dense_scan_root(
                |jp| fixed_residual_at(&p, 0, q, jp, mu, 0.0),
                2.0 * p.gamma / (mu * p.w_hz) * (1.0 + 1e-9),
                got * 4.0,
                20_000,
            )
            .expect("oracle root");
            assert!(
                ((got - oracle) / oracle).abs() < 1e-6,
                "grid {k}: solver {got:e} vs dense scan {oracle:e}"
            );
        }
    }

    #[test]
    fn fixed_avg_baseline_has_gamma_boundary_and_exceeds_discounted_threshold() {
        let p = params();
        let (fixed, c_inf, _) = solve_subpriority_fixed_avg(&p, 0).unwrap();
        assert!((fixed.jp[0] - 2.0 * p.gamma / p.w_hz).abs() < 1e-18);
        assert!(c_inf > 0.0);
        // The discounted equation lacks the c∞ shift, so at equal prices its
        // effective multiplier s(Q) sits above the baseline's at every Q > 0.
        let (disc, _) = solve_subpriority_discounted(&p, 0, 0.8).unwrap();
        for k in 1..fixed.q.len() {
            let s_fixed = 0.5 * p.w_hz * fixed.jp[k];
            let s_disc = 0.8 * 0.5 * p.w_hz * disc.jp[k];
            assert!(
                s_disc > s_fixed,
                "discounted multiplier not above baseline at grid {k}"
            );
        }
    }

    #[test]
    fn zero_lambda_user_gets_flat_boundary_table() {
        let mut cluster = test_cluster();
        cluster.lambda_bps[1] = 0.0;
        let p = SolverParams::from_cluster(&cluster, 1e-4, vec![1e-3, 1e-3]).unwrap();
        let (table, _, _) = solve_subpriority_avg(&p, 1).unwrap();
        let boundary = 2.0 * p.gamma / p.w_hz;
        assert!(table.jp.iter().all(|&jp| jp == boundary));
    }

    #[test]
    fn zero_beta_user_stays_at_boundary() {
        let mut cluster = test_cluster();
        cluster.beta = vec![1.0, 0.0];
        let p = SolverParams::from_cluster(&cluster, 1e-4, vec![1e-3, 1e-3]).unwrap();
        let (table, _, _) = solve_subpriority_avg(&p, 1).unwrap();
        let boundary = 2.0 * p.gamma / p.w_hz;
        for &jp in &table.jp {
            assert!((jp - boundary).abs() <= boundary * 1e-9);
        }
    }

    #[test]
    fn infeasible_arrival_rate_is_reported() {
        let mut cluster = test_cluster();
        // Far beyond any achievable service rate at W = 2 MHz.
        cluster.lambda_bps[0] = 1e12;
        let p = SolverParams::from_cluster(&cluster, 1e-4, vec![1e-3, 1e-3]).unwrap();
        match solve_subpriority_avg(&p, 0) {
            Err(Error::NoRoot { user, .. }) => assert_eq!(user, 0),
            other => panic!("expected NoRoot, got {other:?}"),
        }
    }

    #[test]
    fn table_condition_checker_rejects_decreasing_tables() {
        let bad = UserTable {
            q: vec![0.0, 1.0, 2.0],
            jp: vec![1.0, 0.5, 0.6],
        };
        assert!(check_table_conditions(&bad, 0).is_err());
        let superlinear = UserTable {
            q: (0..64).map(|k| k as f64).collect(),
            jp: (0..64).map(|k| (k as f64).powi(3) + 1.0).collect(),
        };
        assert!(check_table_conditions(&superlinear, 0).is_err());
    }
}
