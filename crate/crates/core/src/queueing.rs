//! Queue dynamics, arrival generation, and delay/constraint accounting for
//! both the time-average and the discounted regime.
//!
//! Queues hold real-valued bits (departures R·τ are real), while arrivals
//! are integer Poisson counts with per-slot mean λ·τ. Delays come from
//! Little's law: backlog divided by the arrival rate in bits/s.

use crate::error::{Error, Result};
use crate::model::Allocation;
use crate::numerics::Real;
use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

/// Per-user backlog in bits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueueState<S> {
    pub q: Vec<S>,
}

impl<S: Real> QueueState<S> {
    pub fn zero(n: usize) -> Self {
        Self {
            q: vec![S::zero(); n],
        }
    }

    pub fn validate(&self) -> Result<()> {
        for v in &self.q {
            if !(*v >= S::zero()) || !v.is_finite() {
                return Err(Error::Config(format!("queue entries must be finite and >= 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// One slot's record: state seen at the slot start, the decision taken, the
/// resulting service rate, and the arrivals landing at the slot end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotRecord<S> {
    pub q: Vec<S>,
    pub r_bps: Vec<S>,
    pub c: Vec<S>,
    pub p_d: Vec<S>,
    pub a_bits: Vec<S>,
}

/// Per-slot records over one simulated horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace<S> {
    pub tau_s: S,
    pub records: Vec<SlotRecord<S>>,
}

impl<S: Real> Trace<S> {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn n_users(&self) -> usize {
        self.records.first().map_or(0, |r| r.q.len())
    }

    /// Copy of the trace with the first `burn_in` slots dropped.
    pub fn skip_prefix(&self, burn_in: usize) -> Trace<S> {
        Trace {
            tau_s: self.tau_s,
            records: self.records[burn_in.min(self.records.len())..].to_vec(),
        }
    }
}

/// Aggregate statistics of one trace.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Metrics<S> {
    /// Time-average delay per user in seconds.
    pub avg_delay_s: Vec<S>,
    /// Discounted total delay per user in seconds (regime-dependent).
    pub discounted_delay_s: Option<Vec<S>>,
    /// Time-average fronthaul capacity per RRH in bits/s/Hz.
    pub avg_capacity: Vec<S>,
    /// Discounted capacity usage per RRH in bits/s/Hz.
    pub discounted_capacity: Option<Vec<S>>,
    /// Time-average dynamic power per user in watts.
    pub avg_dynamic_power_w: Vec<S>,
    /// Whether the backlog shows sustained positive drift.
    pub unstable: bool,
    /// Least-squares slope of the total backlog, bits per slot.
    pub drift_slope: S,
}

/// Queue evolution Q' = max(Q − R·τ, 0) + A, elementwise.
pub fn queue_step<S: Real>(q: &[S], r_bps: &[S], a_bits: &[S], tau_s: S) -> Vec<S> {
    q.iter()
        .zip(r_bps)
        .zip(a_bits)
        .map(|((&q_i, &r_i), &a_i)| (q_i - r_i * tau_s).max(S::zero()) + a_i)
        .collect()
}

/// Poisson arrivals with per-slot mean λᵢ·τ, returned in bits.
pub fn sample_arrivals<S: Real, R: Rng + ?Sized>(lambda_bps: &[S], tau_s: S, rng: &mut R) -> Vec<S> {
    lambda_bps
        .iter()
        .map(|&l| {
            let mean = (l * tau_s).as_f64();
            if mean <= 0.0 {
                return S::zero();
            }
            let draw = Poisson::new(mean).expect("positive Poisson mean").sample(rng);
            S::of(draw.round())
        })
        .collect()
}

/// Time-average delay per user, (1/T)·Σ_t Q(t)/λ.
pub fn average_delay<S: Real>(trace: &Trace<S>, lambda_bps: &[S]) -> Result<Vec<S>> {
    let t = trace.horizon();
    if t == 0 {
        return Err(Error::Metric("average delay of an empty trace".into()));
    }
    let n = trace.n_users();
    let mut acc = vec![S::zero(); n];
    for rec in &trace.records {
        for i in 0..n {
            acc[i] += rec.q[i];
        }
    }
    let t = S::of(t as f64);
    (0..n)
        .map(|i| {
            if !(lambda_bps[i] > S::zero()) {
                return Err(Error::Metric(format!(
                    "average delay undefined for user {i}: lambda = 0"
                )));
            }
            Ok(acc[i] / (lambda_bps[i] * t))
        })
        .collect()
}

/// Discounted total delay per user, Σ_t (Q(t)/λ)·μ^(t−1).
pub fn discounted_delay<S: Real>(trace: &Trace<S>, lambda_bps: &[S], mu: S) -> Result<Vec<S>> {
    if !(mu > S::zero() && mu < S::one()) {
        return Err(Error::Metric(format!("discount must lie in (0,1), got {mu}")));
    }
    let n = trace.n_users();
    let mut acc = vec![S::zero(); n];
    let mut weight = S::one();
    for rec in &trace.records {
        for i in 0..n {
            acc[i] += rec.q[i] * weight;
        }
        weight *= mu;
    }
    (0..n)
        .map(|i| {
            if !(lambda_bps[i] > S::zero()) {
                return Err(Error::Metric(format!(
                    "discounted delay undefined for user {i}: lambda = 0"
                )));
            }
            Ok(acc[i] / lambda_bps[i])
        })
        .collect()
}

/// Capacity and dynamic-power usage: the time average when `mu` is `None`,
/// the discounted sum Σ_t X(t)·μ^(t−1) otherwise.
pub fn constraint_usage<S: Real>(trace: &Trace<S>, mu: Option<S>) -> (Vec<S>, Vec<S>) {
    let n = trace.n_users();
    let mut c = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];
    match mu {
        None => {
            for rec in &trace.records {
                for i in 0..n {
                    c[i] += rec.c[i];
                    p[i] += rec.p_d[i];
                }
            }
            let t = S::of(trace.horizon().max(1) as f64);
            for i in 0..n {
                c[i] = c[i] / t;
                p[i] = p[i] / t;
            }
        }
        Some(mu) => {
            let mut weight = S::one();
            for rec in &trace.records {
                for i in 0..n {
                    c[i] += rec.c[i] * weight;
                    p[i] += rec.p_d[i] * weight;
                }
                weight *= mu;
            }
        }
    }
    (c, p)
}

/// Undiscounted totals over the realized horizon: (Σ_t Q/λ in seconds,
/// Σ_t C, Σ_t p_d). The expectation of the delay total over geometric
/// horizons equals the discounted sum with the matching discount.
pub fn accumulated_totals<S: Real>(trace: &Trace<S>, lambda_bps: &[S]) -> Result<(Vec<S>, Vec<S>, Vec<S>)> {
    let n = trace.n_users();
    let mut d = vec![S::zero(); n];
    let mut c = vec![S::zero(); n];
    let mut p = vec![S::zero(); n];
    for rec in &trace.records {
        for i in 0..n {
            d[i] += rec.q[i];
            c[i] += rec.c[i];
            p[i] += rec.p_d[i];
        }
    }
    for i in 0..n {
        if !(lambda_bps[i] > S::zero()) {
            return Err(Error::Metric(format!(
                "accumulated delay undefined for user {i}: lambda = 0"
            )));
        }
        d[i] = d[i] / lambda_bps[i];
    }
    Ok((d, c, p))
}

/// Convenience record of one slot for building traces in tests and the
/// engine.
pub fn slot_record<S: Real>(
    q: &[S],
    r_bps: &[S],
    allocation: &Allocation<S>,
    a_bits: &[S],
) -> SlotRecord<S> {
    SlotRecord {
        q: q.to_vec(),
        r_bps: r_bps.to_vec(),
        c: allocation.c.clone(),
        p_d: allocation.p_d.clone(),
        a_bits: a_bits.to_vec(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trace_from_queues(qs: Vec<Vec<f64>>, tau_s: f64) -> Trace<f64> {
        let n = qs[0].len();
        Trace {
            tau_s,
            records: qs
                .into_iter()
                .map(|q| SlotRecord {
                    q,
                    r_bps: vec![0.0; n],
                    c: vec![0.0; n],
                    p_d: vec![0.0; n],
                    a_bits: vec![0.0; n],
                })
                .collect(),
        }
    }

    #[test]
    fn queue_step_examples() {
        // Clip at zero.
        assert_eq!(queue_step(&[0.0], &[7.0], &[5.0], 1.0), vec![5.0]);
        // Ordinary drain.
        assert_eq!(queue_step(&[10.0], &[4.0], &[2.0], 1.0), vec![8.0]);
        // Full drain.
        assert_eq!(queue_step(&[3.0], &[10.0], &[0.0], 1.0), vec![0.0]);
    }

    #[test]
    fn queue_step_lower_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let q: f64 = rng.random::<f64>() * 100.0;
            let r: f64 = rng.random::<f64>() * 50.0;
            let a: f64 = rng.random::<f64>() * 20.0;
            let tau = 0.5;
            let next = queue_step(&[q], &[r], &[a], tau)[0];
            assert!(next >= a);
            assert!(next >= q - r * tau);
        }
    }

    #[test]
    fn zero_lambda_always_zero_arrivals() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100 {
            assert_eq!(sample_arrivals(&[0.0], 1.0, &mut rng), vec![0.0]);
        }
    }

    #[test]
    fn poisson_moments_match_oracle() {
        // 1e6 draws at mean 3: sample mean within 1%, variance within 2%.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let n = 1_000_000usize;
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let a = sample_arrivals(&[3.0], 1.0, &mut rng)[0];
            sum += a;
            sum_sq += a * a;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!((mean - 3.0).abs() / 3.0 < 0.01, "mean {mean}");
        assert!((var - 3.0).abs() / 3.0 < 0.02, "variance {var}");
    }

    #[test]
    fn average_delay_examples() {
        // Constant backlog q over T slots → q/λ.
        let tr = trace_from_queues(vec![vec![6.0]; 10], 1e-3);
        let d = average_delay(&tr, &[2.0]).unwrap();
        assert!((d[0] - 3.0).abs() < 1e-12);
        // Empty-queue trace → 0.
        let tr = trace_from_queues(vec![vec![0.0]; 5], 1e-3);
        assert_eq!(average_delay(&tr, &[2.0]).unwrap(), vec![0.0]);
        // λ = 0 is an error.
        let tr = trace_from_queues(vec![vec![1.0]; 5], 1e-3);
        assert!(average_delay(&tr, &[0.0]).is_err());
    }

    #[test]
    fn average_delay_matches_duplicate_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let qs: Vec<Vec<f64>> = (0..64).map(|_| vec![rng.random::<f64>() * 40.0]).collect();
        let tr = trace_from_queues(qs.clone(), 1e-3);
        let lambda = 1.7;
        let got = average_delay(&tr, &[lambda]).unwrap()[0];
        let expect: f64 =
            qs.iter().map(|q| q[0] / lambda).sum::<f64>() / qs.len() as f64;
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn discounted_delay_examples() {
        // Tiny discount: only the first term survives.
        let tr = trace_from_queues(vec![vec![5.0], vec![9.0]], 1e-3);
        let d = discounted_delay(&tr, &[2.5], 1e-12).unwrap();
        assert!((d[0] - 2.0).abs() < 1e-9);
        // Constant backlog: geometric series q/(λ(1−μ)).
        let tr = trace_from_queues(vec![vec![4.0]; 4000], 1e-3);
        let mu = 0.99;
        let d = discounted_delay(&tr, &[2.0], mu).unwrap();
        let expect = 4.0 / (2.0 * (1.0 - mu));
        assert!(((d[0] - expect) / expect).abs() < 1e-9);
    }

    #[test]
    fn discounted_delay_matches_duplicate_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let qs: Vec<Vec<f64>> = (0..50).map(|_| vec![rng.random::<f64>() * 10.0]).collect();
        let tr = trace_from_queues(qs.clone(), 1e-3);
        let (lambda, mu) = (0.8, 0.9);
        let got = discounted_delay(&tr, &[lambda], mu).unwrap()[0];
        let expect: f64 = qs
            .iter()
            .enumerate()
            .map(|(t, q)| q[0] / lambda * mu.powi(t as i32))
            .sum();
        assert!(((got - expect) / expect).abs() < 1e-12);
    }

    #[test]
    fn constraint_usage_examples() {
        let n = 2000;
        let mut tr = trace_from_queues(vec![vec![0.0]; n], 1e-3);
        for rec in &mut tr.records {
            rec.c[0] = 3.0;
            rec.p_d[0] = 0.5;
        }
        let (c_avg, p_avg) = constraint_usage(&tr, None);
        assert!((c_avg[0] - 3.0).abs() < 1e-12);
        assert!((p_avg[0] - 0.5).abs() < 1e-12);
        let mu = 0.99;
        let (c_disc, _) = constraint_usage(&tr, Some(mu));
        let expect = 3.0 / (1.0 - mu);
        assert!(((c_disc[0] - expect) / expect).abs() < 1e-8);
    }

    #[test]
    fn constraint_usage_matches_duplicate_formula_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let mut tr = trace_from_queues(vec![vec![0.0]; 40], 1e-3);
        for rec in &mut tr.records {
            rec.c[0] = rng.random::<f64>() * 6.0;
            rec.p_d[0] = rng.random::<f64>();
        }
        let (c_avg, p_avg) = constraint_usage(&tr, None);
        let exp_c: f64 = tr.records.iter().map(|r| r.c[0]).sum::<f64>() / 40.0;
        let exp_p: f64 = tr.records.iter().map(|r| r.p_d[0]).sum::<f64>() / 40.0;
        assert!((c_avg[0] - exp_c).abs() < 1e-12);
        assert!((p_avg[0] - exp_p).abs() < 1e-12);
        let mu = 0.7;
        let (c_disc, p_disc) = constraint_usage(&tr, Some(mu));
        let exp_c: f64 = tr
            .records
            .iter()
            .enumerate()
            .map(|(t, r)| r.c[0] * mu.powi(t as i32))
            .sum();
        let exp_p: f64 = tr
            .records
            .iter()
            .enumerate()
            .map(|(t, r)| r.p_d[0] * mu.powi(t as i32))
            .sum();
        assert!((c_disc[0] - exp_c).abs() < 1e-12);
        assert!((p_disc[0] - exp_p).abs() < 1e-12);
    }

    #[test]
    fn delay_metrics_are_linear_in_backlog() {
        let qs: Vec<Vec<f64>> = (0..30).map(|t| vec![(t as f64).sin().abs() * 5.0]).collect();
        let scaled: Vec<Vec<f64>> = qs.iter().map(|q| vec![q[0] * 3.0]).collect();
        let t1 = trace_from_queues(qs, 1e-3);
        let t3 = trace_from_queues(scaled, 1e-3);
        let d1 = average_delay(&t1, &[1.0]).unwrap()[0];
        let d3 = average_delay(&t3, &[1.0]).unwrap()[0];
        assert!(((d3 - 3.0 * d1) / d3).abs() < 1e-12);
        let g1 = discounted_delay(&t1, &[1.0], 0.8).unwrap()[0];
        let g3 = discounted_delay(&t3, &[1.0], 0.8).unwrap()[0];
        assert!(((g3 - 3.0 * g1) / g3).abs() < 1e-12);
    }
}
