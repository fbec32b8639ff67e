//! Geometric-horizon / discounted-reward equivalence check on toy MDPs.
//!
//! A total-reward MDP whose horizon is geometric with continue-probability μ
//! has the same expected value as the infinite-horizon μ-discounted MDP.
//! The check pits a Monte-Carlo estimate of the former against exact policy
//! evaluation of the latter.

use crate::error::{Error, Result};
use crate::oracles;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Small finite MDP: rewards[s][a], transitions[s][a][s'].
#[derive(Debug, Clone)]
pub struct ToyMdp {
    pub rewards: Vec<Vec<f64>>,
    pub transitions: Vec<Vec<Vec<f64>>>,
}

impl ToyMdp {
    pub fn n_states(&self) -> usize {
        self.rewards.len()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_states();
        if n == 0 {
            return Err(Error::Config("toy MDP needs at least one state".into()));
        }
        for (s, (r_row, t_row)) in self.rewards.iter().zip(&self.transitions).enumerate() {
            if r_row.len() != t_row.len() || r_row.is_empty() {
                return Err(Error::Config(format!(
                    "state {s}: rewards and transitions must list the same nonzero action count"
                )));
            }
            for (a, probs) in t_row.iter().enumerate() {
                if probs.len() != n {
                    return Err(Error::Config(format!(
                        "state {s} action {a}: transition row has wrong length"
                    )));
                }
                let total: f64 = probs.iter().sum();
                if (total - 1.0).abs() > 1e-9 || probs.iter().any(|&p| p < 0.0) {
                    return Err(Error::Config(format!(
                        "state {s} action {a}: transition row sums to {total}, not 1"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Deterministic random toy MDP for the validation suites.
    pub fn random(n_states: usize, n_actions: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rewards = (0..n_states)
            .map(|_| (0..n_actions).map(|_| rng.random::<f64>() * 2.0 - 0.5).collect())
            .collect();
        let transitions = (0..n_states)
            .map(|_| {
                (0..n_actions)
                    .map(|_| {
                        let raw: Vec<f64> =
                            (0..n_states).map(|_| rng.random::<f64>() + 1e-3).collect();
                        let total: f64 = raw.iter().sum();
                        raw.into_iter().map(|p| p / total).collect()
                    })
                    .collect()
            })
            .collect();
        Self {
            rewards,
            transitions,
        }
    }
}

/// Outcome of one equivalence check.
#[derive(Debug, Clone)]
pub struct Lemma2Report {
    /// Monte-Carlo mean total reward over geometric horizons.
    pub mc_mean: f64,
    /// Standard error of the Monte-Carlo mean.
    pub mc_se: f64,
    /// Exact discounted value of the policy from the start distribution.
    pub exact: f64,
    /// |mc − exact| in standard-error units.
    pub gap_se: f64,
}

/// Compares the Monte-Carlo geometric-horizon total reward of a fixed
/// stationary `policy` (state → action) against exact discounted policy
/// evaluation at discount `mu`. `start` is the initial-state distribution.
pub fn lemma2_check(
    toy: &ToyMdp,
    policy: &[usize],
    mu: f64,
    trials: usize,
    start: &[f64],
    seed: u64,
) -> Result<Lemma2Report> {
    toy.validate()?;
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::Config(format!("mu must lie in (0,1), got {mu}")));
    }
    let n = toy.n_states();
    if policy.len() != n || start.len() != n {
        return Err(Error::Config("policy/start length mismatch".into()));
    }
    if (start.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::Config("start distribution must sum to 1".into()));
    }

    // Exact: v = (I − μ·P_π)⁻¹ r_π, value = startᵀ v.
    let mut a = vec![vec![0.0; n]; n];
    let mut b = vec![0.0; n];
    for s in 0..n {
        let act = policy[s];
        b[s] = toy.rewards[s][act];
        for s2 in 0..n {
            a[s][s2] = if s == s2 { 1.0 } else { 0.0 } - mu * toy.transitions[s][act][s2];
        }
    }
    let v = oracles::solve_linear(a, b)
        .ok_or_else(|| Error::Config("singular policy-evaluation system".into()))?;
    let exact: f64 = start.iter().zip(&v).map(|(p, v)| p * v).sum();

    // Monte-Carlo over geometric horizons.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for _ in 0..trials {
        let mut state = sample_index(&mut rng, start);
        let mut total = 0.0;
        loop {
            let act = policy[state];
            total += toy.rewards[state][act];
            // Continue with probability mu.
            if rng.random::<f64>() >= mu {
                break;
            }
            state = sample_index(&mut rng, &toy.transitions[state][act]);
        }
        sum += total;
        sum_sq += total * total;
    }
    let mc_mean = sum / trials as f64;
    let var = (sum_sq / trials as f64 - mc_mean * mc_mean).max(0.0);
    let mc_se = (var / trials as f64).sqrt();
    let gap_se = if mc_se > 0.0 {
        (mc_mean - exact).abs() / mc_se
    } else {
        0.0
    };
    Ok(Lemma2Report {
        mc_mean,
        mc_se,
        exact,
        gap_se,
    })
}

fn sample_index(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}
