//! Cross-link corrections to the priority gradient.
//!
//! With nonzero off-diagonal path loss the priority function picks up a
//! first-order Taylor term per ordered user pair. Its gradient is a constant
//! determined by five expectation coefficients (the v's), all evaluated at a
//! reference backlog; the per-slot policy then adds `L_ij`-weighted copies
//! of these constants to the interpolated per-user derivative.

use super::closed_forms::{expected_rate, thresholds, Thresholds};
use super::{PriorityTable, SolverParams};
use crate::error::{Error, Result};
use crate::numerics::{exp_integral_e1, exp_integral_e1_scaled, Real};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn e1<S: Real>(z: S) -> S {
    if z.is_infinite() {
        return S::zero();
    }
    exp_integral_e1(z).expect("positive E1 argument")
}

fn e1s<S: Real>(z: S) -> S {
    if z.is_infinite() {
        return S::zero();
    }
    exp_integral_e1_scaled(z).expect("positive E1 argument")
}

/// Expectation constants of one ordered pair (i, j), evaluated at reference
/// priority ratios.
#[derive(Debug, Clone, Copy)]
pub struct CrossLinkCoeffs<S> {
    pub i: usize,
    pub j: usize,
    pub v1: S,
    pub v2: S,
    pub v3: S,
    pub v4: S,
    pub v5: S,
    pub a_i: S,
    pub b_i: S,
    pub alpha_i: S,
    pub th_i: Thresholds<S>,
    pub a_j: S,
    pub b_j: S,
    pub alpha_j: S,
    pub th_j: Thresholds<S>,
    /// Backlogs the reference ratios were taken at.
    pub q_ref: (S, S),
}

/// Evaluates the v-coefficients for the ordered pair (i, j).
///
/// v1 + v2/(αᵢ−1) decomposes E[(y−1)/((x₀+x)(y−1+α))] for user i;
/// v3 + v4(α_j−1) decomposes E[(x₀+x)/z] and v5/(α_j−1) decomposes
/// E[(x₀+x)/(z(y−1))] for user j.
pub fn crosslink_coeffs<S: Real>(
    alpha_i: S,
    alpha_j: S,
    params: &SolverParams<S>,
    i: usize,
    j: usize,
    q_ref: (S, S),
) -> CrossLinkCoeffs<S> {
    let th_i = thresholds(alpha_i, params, i);
    let th_j = thresholds(alpha_j, params, j);
    let (a_i, b_i) = (params.a(i), params.b(i));
    let (a_j, b_j) = (params.a(j), params.b(j));

    // a·e^a·(E1(h3+a) − E1(h0+a)) through the scaled integral.
    let v1 = a_i * ((-th_i.h3).exp() * e1s(th_i.h3 + a_i) - (-th_i.h0).exp() * e1s(th_i.h0 + a_i));
    let v2 = e1(th_i.h0) / b_i;
    let v3 = ((-th_j.h3).exp() - (-th_j.h0).exp()) / a_j - e1(th_j.h0);
    let v4 = b_j * (-th_j.h0).exp();
    let v5 = e1(th_j.h3);

    CrossLinkCoeffs {
        i,
        j,
        v1,
        v2,
        v3,
        v4,
        v5,
        a_i,
        b_i,
        alpha_i,
        th_i,
        a_j,
        b_j,
        alpha_j,
        th_j,
        q_ref,
    }
}

/// Gradient pair (∂J̃_ij/∂Q_i, ∂J̃_ij/∂Q_j) of the joint priority function
/// for the ordered pair in `coeffs`.
///
/// The gain prefactor is γ/L_jj, the straight link of the user whose
/// noise-ratio expectations (v4, v5) enter the numerators: that keeps the
/// Taylor term's total contribution proportional to the cross gain L_ij, so
/// the correction vanishes with the link.
///
/// Errors when the expected single-user rate at the reference point does not
/// exceed the arrival rate (the policy cannot stabilize that user there).
pub fn crosslink_gradient_avg<S: Real>(
    coeffs: &CrossLinkCoeffs<S>,
    params: &SolverParams<S>,
) -> Result<(S, S)> {
    let l_ij = params.l(coeffs.i, coeffs.j);
    if !(l_ij > S::zero()) {
        return Err(Error::Degenerate("cross-link gradient of an absent link"));
    }
    let l_jj = params.l(coeffs.j, coeffs.j);
    let (er_i, _) = expected_rate(coeffs.alpha_i, params, coeffs.i);
    let (er_j, _) = expected_rate(coeffs.alpha_j, params, coeffs.j);
    for (user, er) in [(coeffs.i, er_i), (coeffs.j, er_j)] {
        let lambda = params.lambda_bps[user];
        if er <= lambda {
            return Err(Error::RateDeficit {
                user,
                rate: er.as_f64(),
                lambda: lambda.as_f64(),
            });
        }
    }
    let gamma = params.gamma;
    let d_qi = gamma / l_jj * coeffs.v5 * (S::one() - coeffs.v1) * coeffs.alpha_i
        / (er_i - params.lambda_bps[coeffs.i]);
    let d_qj = gamma / l_jj * coeffs.v1 * coeffs.v4 * coeffs.alpha_j
        / (er_j - params.lambda_bps[coeffs.j]);
    Ok((d_qi, d_qj))
}

/// One ordered pair's solved cross-link correction.
#[derive(Debug, Clone, Copy)]
pub struct PairGradient<S> {
    pub coeffs: CrossLinkCoeffs<S>,
    pub l_ij: S,
    pub d_qi: S,
    pub d_qj: S,
}

/// All cross-link corrections of a cluster, solved once per policy build.
#[derive(Debug, Clone, Default)]
pub struct CrossLinkSet<S> {
    pub pairs: Vec<PairGradient<S>>,
}

/// Builds the cross-link set at reference backlogs `q_ref` (one per user):
/// every ordered pair (i, j) with L_ij > 0 contributes constants.
pub fn build_crosslink_set<S: Real>(
    params: &SolverParams<S>,
    table: &PriorityTable<S>,
    q_ref: &[S],
) -> Result<CrossLinkSet<S>> {
    let mut pairs = Vec::new();
    for i in 0..params.n {
        for j in 0..params.n {
            if i == j {
                continue;
            }
            let l_ij = params.l(i, j);
            if !(l_ij > S::zero()) {
                continue;
            }
            let alpha_i = table.alpha(i, q_ref[i], params);
            let alpha_j = table.alpha(j, q_ref[j], params);
            let coeffs = crosslink_coeffs(alpha_i, alpha_j, params, i, j, (q_ref[i], q_ref[j]));
            let (d_qi, d_qj) = crosslink_gradient_avg(&coeffs, params)?;
            pairs.push(PairGradient {
                coeffs,
                l_ij,
                d_qi,
                d_qj,
            });
        }
    }
    Ok(CrossLinkSet { pairs })
}

/// Full priority gradient ∂J/∂Q per user: the interpolated sub-priority
/// derivative plus the L-weighted cross-link constants.
pub fn priority_gradient_avg<S: Real>(
    q: &[S],
    table: &PriorityTable<S>,
    crosslink: Option<&CrossLinkSet<S>>,
    params: &SolverParams<S>,
) -> Vec<S> {
    let mut grad: Vec<S> = (0..params.n)
        .map(|i| table.users[i].interpolate(q[i]))
        .collect();
    if let Some(set) = crosslink {
        for pair in &set.pairs {
            grad[pair.coeffs.i] += pair.l_ij * pair.d_qi;
            grad[pair.coeffs.j] += pair.l_ij * pair.d_qj;
        }
    }
    grad
}

/// Discounted-regime cross-link gradient ∂J̃_ij/∂Q_i at backlog Qᵢ:
/// 2·J'ᵢ(Qᵢ)·(1 − aᵢe^(aᵢ)E₁(aᵢ))·K / (L_jj·(e^(aᵢ)E₁(aᵢ)/ln2 − 2λᵢ/W)).
///
/// As in the average regime, the gain prefactor is the straight link L_jj
/// of the user behind the noise-ratio constant K, so the L_ij-weighted
/// Taylor term vanishes with the cross link. `k_const` is estimated by
/// [`discounted_k_constant`].
pub fn crosslink_gradient_discounted<S: Real>(
    jp_at_qi: S,
    params: &SolverParams<S>,
    i: usize,
    j: usize,
    k_const: S,
) -> Result<S> {
    let l_ij = params.l(i, j);
    if !(l_ij > S::zero()) {
        return Err(Error::Degenerate("cross-link gradient of an absent link"));
    }
    let l_jj = params.l(j, j);
    let a_i = params.a(i);
    let scaled = e1s(a_i); // e^a·E1(a)
    let denom = l_jj * (scaled / S::LN_2() - S::of(2.0) * params.lambda_bps[i] / params.w_hz);
    if denom.abs() < S::of(1e-300) {
        return Err(Error::Degenerate("discounted cross-link denominator"));
    }
    Ok(S::of(2.0) * jp_at_qi * (S::one() - a_i * scaled) * k_const / denom)
}

/// Monte-Carlo estimate of the constant K defined by
/// E[(N* + σ²)/(L_jj·z)] = 2σ²K/L_jj under the fixed-power policy at
/// effective multiplier ratio `alpha_eff` = s/γ. Deterministic for a given
/// seed; inactive realizations (no capacity) contribute zero, matching the
/// active-region integrals of the other expectations.
pub fn discounted_k_constant<S: Real>(
    params: &SolverParams<S>,
    user: usize,
    alpha_eff: S,
    samples: usize,
    seed: u64,
) -> S {
    if alpha_eff <= S::one() {
        return S::zero();
    }
    let a = params.a(user);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut acc = S::zero();
    for _ in 0..samples {
        let u: f64 = rng.random();
        let z = S::of(-(1.0 - u).ln());
        let x0 = z / a;
        let y = x0 * (alpha_eff - S::one());
        if y <= S::one() {
            continue;
        }
        // (N* + σ²)/(2σ²z) with N* + σ² = σ²·x₀·α/(y − 1).
        acc += x0 * alpha_eff / ((y - S::one()) * S::of(2.0) * z);
    }
    acc / S::of(samples as f64)
}
