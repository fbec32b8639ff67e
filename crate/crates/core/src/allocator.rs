//! Per-slot decision rules mapping (channel, backlog, priority table) to
//! fronthaul capacities and dynamic powers, plus a numeric minimizer used as
//! a validation oracle.

use crate::error::Result;
use crate::model::{rates_with, Allocation, ChannelRealization};
use crate::numerics::Real;
use crate::priority::{
    priority_gradient_avg, thresholds, CrossLinkSet, PriorityTable, Regime, SolverParams,
};

/// Everything a per-slot decision needs: the channel draw, the backlogs, and
/// the solved policy (table, cross-link constants, prices inside `params`).
#[derive(Clone, Copy)]
pub struct SlotContext<'a, S> {
    pub channel: &'a ChannelRealization<S>,
    pub q: &'a [S],
    pub table: &'a PriorityTable<S>,
    pub crosslink: Option<&'a CrossLinkSet<S>>,
    pub params: &'a SolverParams<S>,
}

impl<'a, S: Real> SlotContext<'a, S> {
    /// Linear rate weights of the per-slot objective: the corrected priority
    /// gradient in the average regime, μ·J'ᵢ(Qᵢ) in the discounted one.
    pub fn rate_weights(&self) -> Vec<S> {
        match self.table.regime {
            Regime::Average => {
                priority_gradient_avg(self.q, self.table, self.crosslink, self.params)
            }
            Regime::Discounted { mu } => (0..self.params.n)
                .map(|i| mu * self.table.users[i].interpolate(self.q[i]))
                .collect(),
        }
    }
}

/// Normalized per-user variables of the joint allocation rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct IntermediateVars<S> {
    /// Normalized dynamic power x = p_d·|H|²/σ².
    pub x: S,
    /// Normalized base power x₀ = p₀·|H|²/σ².
    pub x0: S,
    /// y = 2^C at the decision.
    pub y: S,
    /// Priority ratio α = W·(∂J/∂Q)/(2γ).
    pub alpha: S,
    /// k = b·z, the normalized channel-over-price variable.
    pub k: S,
    /// b = γ·L/(μ·σ²·ln2).
    pub b: S,
    /// z = |h̃|², the small-scale fading power.
    pub z: S,
}

/// Joint fronthaul/power allocation: closed-form per-user rule driven by the
/// cross-link-corrected priority gradient.
///
/// Per user: below α = 1 or below the fading threshold h₃ nothing is
/// allocated; between h₃ and h₀ only capacity (at base power); above h₀ the
/// positive square-root branch sets the dynamic power, clipped into
/// [0, p_max − p₀].
pub fn allocate_joint<S: Real>(ctx: &SlotContext<'_, S>) -> (Allocation<S>, Vec<IntermediateVars<S>>) {
    let params = ctx.params;
    let n = params.n;
    let grad = ctx.rate_weights();
    let mut alloc = Allocation::zero(n);
    let mut ivs = Vec::with_capacity(n);
    for i in 0..n {
        let alpha = params.w_hz * grad[i] / (S::of(2.0) * params.gamma);
        let z = ctx.channel.z(i);
        let gain = ctx.channel.h[(i, i)].norm_sqr();
        let b = params.b(i);
        let mut iv = IntermediateVars {
            x: S::zero(),
            x0: params.p0_w[i] * gain / params.sigma2,
            y: S::one(),
            alpha,
            k: b * z,
            b,
            z,
        };
        if alpha <= S::one() {
            ivs.push(iv);
            continue;
        }
        let th = thresholds(alpha, params, i);
        if z <= th.h3 {
            ivs.push(iv);
            continue;
        }
        let am1 = alpha - S::one();
        let mut x_star = S::zero();
        if z > th.h0 {
            let k = iv.k;
            let disc = k * k * am1 * am1 + S::one() - S::of(2.0) * k * (alpha + S::one());
            let x_tot = S::of(0.5) * (k * am1 - S::one() + disc.max(S::zero()).sqrt());
            x_star = (x_tot - iv.x0).max(S::zero());
        }
        // Instantaneous power cap p₀ + p_d ≤ p_max; capacity follows the
        // power actually granted.
        let x_cap = (params.p_max_w[i] - params.p0_w[i]) * gain / params.sigma2;
        x_star = x_star.min(x_cap);
        let y = (iv.x0 + x_star) * am1;
        if y > S::one() {
            alloc.c[i] = y.log2();
            alloc.p_d[i] = x_star * params.sigma2 / gain;
            iv.x = x_star;
            iv.y = y;
        }
        ivs.push(iv);
    }
    (alloc, ivs)
}

/// Capacity-only rule at constant power:
/// C*ᵢ = (log₂(p·|Hᵢᵢ|²/σ² · (μ·(W/2)·J'ᵢ(Qᵢ)/γ − 1)⁺))⁺.
///
/// `mu = 1` with an average-regime fixed-power table gives the time-average
/// baseline; a discounted table uses its own continue-probability.
pub fn allocate_fixed_power<S: Real>(ctx: &SlotContext<'_, S>, mu: S) -> Allocation<S> {
    let params = ctx.params;
    let n = params.n;
    let mut alloc = Allocation::zero(n);
    for i in 0..n {
        let jp = ctx.table.users[i].interpolate(ctx.q[i]);
        let ratio = mu * params.w_hz * S::of(0.5) * jp / params.gamma - S::one();
        if ratio <= S::zero() {
            continue;
        }
        let gain = ctx.channel.h[(i, i)].norm_sqr();
        let arg = params.p0_w[i] * gain / params.sigma2 * ratio;
        if arg > S::one() {
            alloc.c[i] = arg.log2();
        }
    }
    alloc
}

/// Per-slot cost Σᵢ (βᵢQᵢ/λᵢ + γCᵢ + μᵢ·p_dᵢ).
pub fn slot_cost<S: Real>(q: &[S], allocation: &Allocation<S>, params: &SolverParams<S>) -> S {
    let mut acc = S::zero();
    for i in 0..params.n {
        acc += params.beta[i] * q[i] / params.lambda_bps[i]
            + params.gamma * allocation.c[i]
            + params.mu_power[i] * allocation.p_d[i];
    }
    acc
}

/// The per-slot objective the policies minimize: slot cost plus
/// Σᵢ wᵢ·(λᵢ − Rᵢ(H, C, p)) with the full coupled rate expression.
pub fn allocation_objective<S: Real>(
    ctx: &SlotContext<'_, S>,
    allocation: &Allocation<S>,
    weights: &[S],
) -> S {
    let params = ctx.params;
    let r = rates_with(
        ctx.channel,
        allocation,
        &params.p0_w,
        params.sigma2,
        params.w_hz,
    );
    let mut acc = slot_cost(ctx.q, allocation, params);
    for i in 0..params.n {
        acc += weights[i] * (params.lambda_bps[i] - r[i]);
    }
    acc
}

/// Outcome of the numeric minimizer.
pub struct NumericAllocation<S> {
    pub allocation: Allocation<S>,
    pub objective: S,
    /// Set when the iteration cap was hit before the objective settled.
    pub converged: bool,
}

const NUMERIC_STARTS: usize = 4;
const NUMERIC_SWEEPS: usize = 60;
const NUMERIC_TOL: f64 = 1e-6;
const CAPACITY_CEILING: f64 = 50.0;

/// Numerically minimizes the per-slot objective over C ≥ 0 and
/// 0 ≤ p_d ≤ p_max − p₀ by multistart coordinate descent with a
/// grid-seeded golden-section line search per coordinate.
///
/// Used as the validation oracle for the closed-form rules and as the exact
/// cross-link-aware decision when invoked as a policy.
pub fn allocate_numeric<S: Real>(ctx: &SlotContext<'_, S>) -> NumericAllocation<S> {
    let params = ctx.params;
    let n = params.n;
    let weights = ctx.rate_weights();
    let power_controlled = ctx.table.power_controlled;
    let pd_hi: Vec<S> = (0..n)
        .map(|i| {
            if power_controlled {
                (params.p_max_w[i] - params.p0_w[i]).max(S::zero())
            } else {
                S::zero()
            }
        })
        .collect();
    let c_hi = vec![S::of(CAPACITY_CEILING); n];

    // Deterministic multistart: cold start, the closed-form decision, and
    // two box-interior points.
    let (closed, _) = allocate_joint(ctx);
    let mut starts: Vec<Allocation<S>> = Vec::with_capacity(NUMERIC_STARTS);
    starts.push(Allocation::zero(n));
    starts.push(if power_controlled {
        closed
    } else {
        allocate_fixed_power(
            ctx,
            match ctx.table.regime {
                Regime::Average => S::one(),
                Regime::Discounted { mu } => mu,
            },
        )
    });
    starts.push(Allocation {
        c: c_hi.iter().map(|&c| c * S::of(0.25)).collect(),
        p_d: pd_hi.iter().map(|&p| p * S::of(0.5)).collect(),
    });
    starts.push(Allocation {
        c: c_hi.iter().map(|&c| c * S::of(0.1)).collect(),
        p_d: vec![S::zero(); n],
    });

    let mut best: Option<NumericAllocation<S>> = None;
    for start in starts {
        let mut alloc = start;
        let mut obj = allocation_objective(ctx, &alloc, &weights);
        let mut converged = false;
        for _ in 0..NUMERIC_SWEEPS {
            let before = obj;
            for i in 0..n {
                let cur = alloc.c[i];
                let (x, fx) = line_minimize(
                    |v| {
                        let mut trial = alloc.clone();
                        trial.c[i] = v;
                        allocation_objective(ctx, &trial, &weights)
                    },
                    S::zero(),
                    c_hi[i],
                    cur,
                    obj,
                );
                alloc.c[i] = x;
                obj = fx;
                if pd_hi[i] > S::zero() {
                    let cur = alloc.p_d[i];
                    let (x, fx) = line_minimize(
                        |v| {
                            let mut trial = alloc.clone();
                            trial.p_d[i] = v;
                            allocation_objective(ctx, &trial, &weights)
                        },
                        S::zero(),
                        pd_hi[i],
                        cur,
                        obj,
                    );
                    alloc.p_d[i] = x;
                    obj = fx;
                }
            }
            if (before - obj).abs() <= S::of(NUMERIC_TOL) * S::one().max(obj.abs()) {
                converged = true;
                break;
            }
        }
        let candidate = NumericAllocation {
            allocation: alloc,
            objective: obj,
            converged,
        };
        best = Some(match best {
            Some(b) if b.objective <= candidate.objective => b,
            _ => candidate,
        });
    }
    best.expect("at least one start")
}

/// Coarse grid scan followed by golden-section refinement on the bracketing
/// cells. `(x_cur, f_cur)` seeds the scan so a sweep can only improve.
fn line_minimize<S: Real, F: FnMut(S) -> S>(
    mut f: F,
    lo: S,
    hi: S,
    x_cur: S,
    f_cur: S,
) -> (S, S) {
    if hi <= lo {
        return (lo, f_cur);
    }
    const CELLS: usize = 24;
    let step = (hi - lo) / S::of(CELLS as f64);
    let mut best_x = x_cur;
    let mut best_f = f_cur;
    for k in 0..=CELLS {
        let x = lo + step * S::of(k as f64);
        let fx = f(x);
        if fx < best_f {
            best_f = fx;
            best_x = x;
        }
    }
    let mut a = (best_x - step).max(lo);
    let mut b = (best_x + step).min(hi);
    // Golden-section on [a, b].
    let inv_phi = S::of(0.618_033_988_749_894_9);
    let mut x1 = b - (b - a) * inv_phi;
    let mut x2 = a + (b - a) * inv_phi;
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..48 {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - (b - a) * inv_phi;
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + (b - a) * inv_phi;
            f2 = f(x2);
        }
        if (b - a).abs() <= S::of(1e-10) * S::one().max(a.abs()) {
            break;
        }
    }
    let mid = (a + b) * S::of(0.5);
    let fm = f(mid);
    if fm < best_f {
        (mid, fm)
    } else {
        (best_x, best_f)
    }
}

/// Relative first-order-condition residual at an interior optimum of the
/// joint rule: (y−1)/((x+x₀+1)(x+x₀+y)) · α·k − 1.
pub fn interior_foc_residual<S: Real>(iv: &IntermediateVars<S>) -> S {
    let x = iv.x + iv.x0;
    let lhs = (iv.y - S::one()) / ((x + S::one()) * (x + iv.y));
    lhs * iv.alpha * iv.k - S::one()
}

/// Second-order (Hessian) condition at an interior optimum:
/// (x + x₀)(y − 2) − 1 ≥ 0.
pub fn hessian_condition<S: Real>(iv: &IntermediateVars<S>) -> S {
    (iv.x + iv.x0) * (iv.y - S::of(2.0)) - S::one()
}

/// True when the decision has strictly positive dynamic power not pinned at
/// the box edge; only there do the interior optimality conditions apply.
pub fn is_interior<S: Real>(iv: &IntermediateVars<S>, params: &SolverParams<S>, user: usize) -> bool {
    if !(iv.x > S::zero()) {
        return false;
    }
    let x_cap = (params.p_max_w[user] - params.p0_w[user]) * iv.z * params.l(user, user)
        / params.sigma2;
    iv.x < x_cap * (S::one() - S::of(1e-9))
}

/// Convenience check used by tests: validity of an allocation.
pub fn validate_allocation<S: Real>(allocation: &Allocation<S>) -> Result<()> {
    allocation.validate()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{sample_channel, ClusterConfig};
    use crate::priority::{solve_table_avg_fixed, solve_table_avg_joint, UserTable, SolveWarnings};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cluster(delta: f64) -> ClusterConfig<f64> {
        ClusterConfig {
            n: 2,
            w_hz: 2e6,
            tau_s: 1e-3,
            sigma2: 1.0,
            c_tot: 10.0,
            path_loss: vec![1.0, delta, delta, 1.0],
            p0_w: vec![10.0, 10.0],
            p_max_w: vec![200.0, 200.0],
            lambda_bps: vec![4e5, 4e5],
            beta: vec![1.0, 1.0],
            seed: 5,
        }
    }

    fn params(delta: f64) -> SolverParams<f64> {
        SolverParams::from_cluster(&cluster(delta), 1e-4, vec![1e-3, 1e-3]).unwrap()
    }

    /// Flat table pinning each user's priority ratio to a chosen α.
    fn synthetic_table(params: &SolverParams<f64>, alphas: &[f64]) -> PriorityTable<f64> {
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
        PriorityTable {
            regime: Regime::Average,
            power_controlled: true,
            users,
            c_inf: vec![0.0; alphas.len()],
            warnings: SolveWarnings::default(),
        }
    }

    #[test]
    fn no_allocation_below_alpha_one_or_threshold() {
        let p = params(0.0);
        let table = synthetic_table(&p, &[0.8, 1.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ch = sample_channel(&cluster(0.0), &mut rng).unwrap();
        let q = [1e4, 1e4];
        let ctx = SlotContext {
            channel: &ch,
            q: &q,
            table: &table,
            crosslink: None,
            params: &p,
        };
        let (alloc, ivs) = allocate_joint(&ctx);
        assert_eq!(alloc.c, vec![0.0, 0.0]);
        assert_eq!(alloc.p_d, vec![0.0, 0.0]);
        assert_eq!(ivs[0].y, 1.0);

        // Large alpha but fading below h3: still nothing.
        let table = synthetic_table(&p, &[50.0, 50.0]);
        let th = crate::priority::thresholds(50.0, &p, 0);
        let mut found = false;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..500 {
            let ch = sample_channel(&cluster(0.0), &mut rng).unwrap();
            if ch.z(0) <= th.h3 {
                let ctx = SlotContext {
                    channel: &ch,
                    q: &q,
                    table: &table,
                    crosslink: None,
                    params: &p,
                };
                let (alloc, _) = allocate_joint(&ctx);
                assert_eq!(alloc.c[0], 0.0);
                assert_eq!(alloc.p_d[0], 0.0);
                found = true;
            }
        }
        assert!(found, "no sub-threshold fade sampled");
    }

    #[test]
    fn joint_matches_numeric_oracle_without_crosslinks() {
        let cl = cluster(0.0);
        let p = params(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for trial in 0..60 {
            let alphas = [
                10.0 + 290.0 * rng.random::<f64>(),
                10.0 + 290.0 * rng.random::<f64>(),
            ];
            let table = synthetic_table(&p, &alphas);
            let ch = sample_channel(&cl, &mut rng).unwrap();
            let q = [rng.random::<f64>() * 1e4, rng.random::<f64>() * 1e4];
            let ctx = SlotContext {
                channel: &ch,
                q: &q,
                table: &table,
                crosslink: None,
                params: &p,
            };
            let w = ctx.rate_weights();
            let (closed, _) = allocate_joint(&ctx);
            let closed_obj = allocation_objective(&ctx, &closed, &w);
            let numeric = allocate_numeric(&ctx);
            let scale = numeric.objective.abs().max(1e-9);
            assert!(
                closed_obj - numeric.objective >= -scale * 1e-4,
                "trial {trial}: closed beat the oracle minimum by more than tolerance"
            );
            assert!(
                (closed_obj - numeric.objective) / scale < 0.01,
                "trial {trial}: closed {closed_obj} vs numeric {}",
                numeric.objective
            );
        }
    }

    #[test]
    fn interior_optima_satisfy_first_and_second_order_conditions() {
        let cl = cluster(0.0);
        let p = params(0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut interior_seen = 0;
        for _ in 0..400 {
            let alphas = [
                10.0 + 200.0 * rng.random::<f64>(),
                10.0 + 200.0 * rng.random::<f64>(),
            ];
            let table = synthetic_table(&p, &alphas);
            let ch = sample_channel(&cl, &mut rng).unwrap();
            let q = [1e4, 1e4];
            let ctx = SlotContext {
                channel: &ch,
                q: &q,
                table: &table,
                crosslink: None,
                params: &p,
            };
            let (_, ivs) = allocate_joint(&ctx);
            for (i, iv) in ivs.iter().enumerate() {
                if is_interior(iv, &p, i) {
                    interior_seen += 1;
                    assert!(
                        interior_foc_residual(iv).abs() < 1e-6,
                        "FOC residual {} at interior point",
                        interior_foc_residual(iv)
                    );
                    assert!(
                        hessian_condition(iv) >= 0.0,
                        "Hessian condition violated: {}",
                        hessian_condition(iv)
                    );
                }
            }
        }
        assert!(interior_seen > 100, "too few interior optima sampled");
    }

    #[test]
    fn power_cap_is_respected() {
        let mut cl = cluster(0.0);
        cl.p_max_w = vec![12.0, 12.0]; // only 2 W of dynamic headroom
        let p = SolverParams::from_cluster(&cl, 1e-4, vec![1e-6, 1e-6]).unwrap();
        let table = synthetic_table(&p, &[400.0, 400.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let ch = sample_channel(&cl, &mut rng).unwrap();
            let q = [1e5, 1e5];
            let ctx = SlotContext {
                channel: &ch,
                q: &q,
                table: &table,
                crosslink: None,
                params: &p,
            };
            let (alloc, _) = allocate_joint(&ctx);
            for i in 0..2 {
                assert!(cl.p0_w[i] + alloc.p_d[i] <= cl.p_max_w[i] * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn fixed_power_examples() {
        let cl = cluster(0.0);
        let p = params(0.0);
        let mut table = solve_table_avg_fixed(&p).unwrap();
        // Pin J' so that mu·(W/2)·J'/gamma = 3 exactly.
        let jp = 3.0 * p.gamma / (0.5 * p.w_hz);
        table.users[0] = UserTable {
            q: vec![0.0, 1e9],
            jp: vec![jp, jp],
        };
        // Channel with |H_11|²·p0/sigma2 = 1 → C = log2(1·(3−1)) = 1.
        let mut h_tilde = crate::linalg::CMat::identity(2);
        h_tilde[(0, 0)] = num_complex::Complex::new((1.0f64 / cl.p0_w[0]).sqrt(), 0.0);
        let ch = crate::model::ChannelRealization::from_small_scale(h_tilde, &cl).unwrap();
        let q = [1e4, 0.0];
        let ctx = SlotContext {
            channel: &ch,
            q: &q,
            table: &table,
            crosslink: None,
            params: &p,
        };
        let alloc = allocate_fixed_power(&ctx, 1.0);
        assert!((alloc.c[0] - 1.0).abs() < 1e-12);
        assert_eq!(alloc.p_d, vec![0.0, 0.0]);

        // Below the multiplier threshold: zero.
        let jp_low = 0.5 * p.gamma / (0.5 * p.w_hz);
        table.users[0].jp = vec![jp_low, jp_low];
        let ctx = SlotContext {
            channel: &ch,
            q: &q,
            table: &table,
            crosslink: None,
            params: &p,
        };
        assert_eq!(allocate_fixed_power(&ctx, 1.0).c[0], 0.0);

        // Inner argument in (0,1): clipped to zero by the outer (·)⁺.
        let jp_mid = 1.5 * p.gamma / (0.5 * p.w_hz);
        table.users[0].jp = vec![jp_mid, jp_mid];
        let ctx = SlotContext {
            channel: &ch,
            q: &q,
            table: &table,
            crosslink: None,
            params: &p,
        };
        assert_eq!(allocate_fixed_power(&ctx, 1.0).c[0], 0.0);
    }

    #[test]
    fn zero_gradient_makes_zero_allocation_optimal() {
        let cl = cluster(0.0);
        let p = params(0.0);
        let table = synthetic_table(&p, &[0.0, 0.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let ch = sample_channel(&cl, &mut rng).unwrap();
        let q = [0.0, 0.0];
        let ctx = SlotContext {
            channel: &ch,
            q: &q,
            table: &table,
            crosslink: None,
            params: &p,
        };
        let numeric = allocate_numeric(&ctx);
        assert!(numeric.allocation.c.iter().all(|&c| c < 1e-6));
        assert!(numeric.allocation.p_d.iter().all(|&p| p < 1e-6));
    }

    #[test]
    fn slot_cost_examples_and_oracle() {
        let p = params(0.0);
        let zero = Allocation::zero(2);
        assert_eq!(slot_cost(&[0.0, 0.0], &zero, &p), 0.0);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let q = [rng.random::<f64>() * 1e4, rng.random::<f64>() * 1e4];
            let alloc = Allocation {
                c: vec![rng.random::<f64>() * 8.0, rng.random::<f64>() * 8.0],
                p_d: vec![rng.random::<f64>() * 3.0, rng.random::<f64>() * 3.0],
            };
            let got = slot_cost(&q, &alloc, &p);
            // Duplicate-formula oracle.
            let mut expect = 0.0;
            for i in 0..2 {
                expect += p.beta[i] * q[i] / p.lambda_bps[i]
                    + p.gamma * alloc.c[i]
                    + p.mu_power[i] * alloc.p_d[i];
            }
            assert!(((got - expect) / expect).abs() < 1e-12);

            // Additivity across users.
            let single0 = {
                let a0 = Allocation {
                    c: vec![alloc.c[0], 0.0],
                    p_d: vec![alloc.p_d[0], 0.0],
                };
                slot_cost(&[q[0], 0.0], &a0, &p)
            };
            let single1 = {
                let a1 = Allocation {
                    c: vec![0.0, alloc.c[1]],
                    p_d: vec![0.0, alloc.p_d[1]],
                };
                slot_cost(&[0.0, q[1]], &a1, &p)
            };
            assert!(((single0 + single1 - got) / got).abs() < 1e-12);
        }
    }

    #[test]
    fn solved_tables_drive_consistent_joint_decisions() {
        // End-to-end smoke: solve real tables, allocate, and check the
        // never-allocate guard on alpha <= 1 with empty queues.
        let cl = cluster(0.1);
        let p = params(0.1);
        let table = solve_table_avg_joint(&p).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let ch = sample_channel(&cl, &mut rng).unwrap();
        let q = [0.0, 0.0];
        let ctx = SlotContext {
            channel: &ch,
            q: &q,
            table: &table,
            crosslink: None,
            params: &p,
        };
        let (alloc, ivs) = allocate_joint(&ctx);
        assert_eq!(alloc.c, vec![0.0, 0.0]);
        assert!((ivs[0].alpha - 1.0).abs() < 1e-9);
    }
}
