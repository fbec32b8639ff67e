//! Queue drift detection.

use crate::numerics::Real;
use crate::queueing::Trace;

/// Default drift threshold as a fraction of the mean per-slot arrivals.
pub const DEFAULT_DRIFT_EPSILON: f64 = 0.05;

/// Least-squares slope of the total backlog over the last half of the trace
/// (bits per slot), flagged unstable when it exceeds
/// `epsilon · Σᵢ λᵢ·τ`.
pub fn detect_instability<S: Real>(
    trace: &Trace<S>,
    lambda_bps: &[S],
    tau_s: S,
    epsilon: f64,
) -> (bool, S) {
    let t = trace.horizon();
    if t < 4 {
        return (false, S::zero());
    }
    let start = t / 2;
    let m = t - start;
    // Slope of y(k) = total backlog against k = 0..m over the tail.
    let mut sum_k = S::zero();
    let mut sum_y = S::zero();
    let mut sum_kk = S::zero();
    let mut sum_ky = S::zero();
    for (k, rec) in trace.records[start..].iter().enumerate() {
        let kf = S::of(k as f64);
        let y: S = rec.q.iter().copied().sum();
        sum_k += kf;
        sum_y += y;
        sum_kk += kf * kf;
        sum_ky += kf * y;
    }
    let mf = S::of(m as f64);
    let denom = mf * sum_kk - sum_k * sum_k;
    if denom <= S::zero() {
        return (false, S::zero());
    }
    let slope = (mf * sum_ky - sum_k * sum_y) / denom;
    let mean_arrivals: S = lambda_bps.iter().map(|&l| l * tau_s).sum();
    let flag = slope > S::of(epsilon) * mean_arrivals && mean_arrivals > S::zero();
    (flag, slope)
}

/// Per-user drift detection: slope of each user's backlog over the last
/// half of the trace against `epsilon · λᵢ·τ`.
pub fn detect_instability_per_user<S: Real>(
    trace: &Trace<S>,
    lambda_bps: &[S],
    tau_s: S,
    epsilon: f64,
) -> Vec<(bool, S)> {
    let t = trace.horizon();
    let n = trace.n_users();
    if t < 4 {
        return vec![(false, S::zero()); n];
    }
    let start = t / 2;
    let m = t - start;
    let mf = S::of(m as f64);
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut sum_k = S::zero();
        let mut sum_y = S::zero();
        let mut sum_kk = S::zero();
        let mut sum_ky = S::zero();
        for (k, rec) in trace.records[start..].iter().enumerate() {
            let kf = S::of(k as f64);
            sum_k += kf;
            sum_y += rec.q[i];
            sum_kk += kf * kf;
            sum_ky += kf * rec.q[i];
        }
        let denom = mf * sum_kk - sum_k * sum_k;
        if denom <= S::zero() {
            out.push((false, S::zero()));
            continue;
        }
        let slope = (mf * sum_ky - sum_k * sum_y) / denom;
        let arrivals = lambda_bps[i] * tau_s;
        out.push((slope > S::of(epsilon) * arrivals && arrivals > S::zero(), slope));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::queueing::SlotRecord;

    fn trace_of(qs: Vec<f64>) -> Trace<f64> {
        Trace {
            tau_s: 1e-3,
            records: qs
                .into_iter()
                .map(|q| SlotRecord {
                    q: vec![q],
                    r_bps: vec![0.0],
                    c: vec![0.0],
                    p_d: vec![0.0],
                    a_bits: vec![0.0],
                })
                .collect(),
        }
    }

    #[test]
    fn stationary_trace_is_stable() {
        let qs: Vec<f64> = (0..2000).map(|k| 50.0 + 10.0 * (k as f64 * 0.37).sin()).collect();
        let (flag, slope) = detect_instability(&trace_of(qs), &[1e5], 1e-3, 0.05);
        assert!(!flag);
        assert!(slope.abs() < 1.0);
    }

    #[test]
    fn linear_ramp_is_flagged_with_matching_slope() {
        let c = 17.0;
        let qs: Vec<f64> = (0..2000).map(|k| c * k as f64).collect();
        let (flag, slope) = detect_instability(&trace_of(qs), &[1e5], 1e-3, 0.05);
        assert!(flag);
        assert!((slope - c).abs() < 1e-6, "slope {slope}");
    }

    #[test]
    fn short_traces_are_never_flagged() {
        let (flag, _) = detect_instability(&trace_of(vec![0.0, 10.0, 20.0]), &[1e5], 1e-3, 0.05);
        assert!(!flag);
    }
}
