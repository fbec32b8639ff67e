//! CSV emission. The schemas here are the authoritative artifact outputs;
//! plots are always rendered from these files, never from internal state.

use cransim_core::queueing::Trace;
use cransim_core::sim::experiments::{ParetoPoint, SweepPointResult};
use cransim_core::PriorityTable64;
use std::fmt::Write as _;

/// `sweep_value,policy,mean_metric,ci_low,ci_high,unstable_fraction`
pub fn metrics_csv(rows: &[SweepPointResult]) -> String {
    let mut out = String::from("sweep_value,policy,mean_metric,ci_low,ci_high,unstable_fraction\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.sweep_value, r.policy, r.mean_metric, r.ci_low, r.ci_high, r.unstable_fraction
        )
        .expect("string write");
    }
    out
}

/// `t,user,Q_bits,R_bps,C_bpshz,p_d_watts,A_bits`
pub fn trace_csv(trace: &Trace<f64>) -> String {
    let mut out = String::from("t,user,Q_bits,R_bps,C_bpshz,p_d_watts,A_bits\n");
    for (t, rec) in trace.records.iter().enumerate() {
        for user in 0..rec.q.len() {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                t + 1,
                user,
                rec.q[user],
                rec.r_bps[user],
                rec.c[user],
                rec.p_d[user],
                rec.a_bits[user]
            )
            .expect("string write");
        }
    }
    out
}

/// `beta_1,beta_2,dbar_1_s,dbar_2_s,ci_low_1,ci_high_1,ci_low_2,ci_high_2,unstable_frac_1,unstable_frac_2`
pub fn pareto_csv(points: &[ParetoPoint]) -> String {
    let mut out = String::from(
        "beta_1,beta_2,dbar_1_s,dbar_2_s,ci_low_1,ci_high_1,ci_low_2,ci_high_2,unstable_frac_1,unstable_frac_2\n",
    );
    for p in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            p.beta.0,
            p.beta.1,
            p.delay_s.0,
            p.delay_s.1,
            p.ci_low.0,
            p.ci_high.0,
            p.ci_low.1,
            p.ci_high.1,
            p.unstable_fraction.0,
            p.unstable_fraction.1
        )
        .expect("string write");
    }
    out
}

/// Priority-table dump (`user,Q_bits,Jprime,regime,c_inf_or_mu`).
pub fn table_csv(table: &PriorityTable64) -> String {
    table.to_csv()
}

#[cfg(test)]
mod tests {
    use super::*;
    use cransim_core::queueing::SlotRecord;

    #[test]
    fn trace_csv_has_one_row_per_slot_and_user() {
        let trace = Trace {
            tau_s: 1e-3,
            records: vec![
                SlotRecord {
                    q: vec![1.0, 2.0],
                    r_bps: vec![3.0, 4.0],
                    c: vec![5.0, 6.0],
                    p_d: vec![7.0, 8.0],
                    a_bits: vec![9.0, 10.0],
                };
                4
            ],
        };
        let csv = trace_csv(&trace);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 4 * 2);
        assert_eq!(lines[0], "t,user,Q_bits,R_bps,C_bpshz,p_d_watts,A_bits");
        assert_eq!(lines[1], "1,0,1,3,5,7,9");
    }

    #[test]
    fn metrics_csv_prints_inf_for_unstable_points() {
        let rows = vec![SweepPointResult {
            sweep_value: 2.0,
            policy: "fixed_power".into(),
            mean_metric: f64::INFINITY,
            ci_low: f64::INFINITY,
            ci_high: f64::INFINITY,
            unstable_fraction: 1.0,
            per_user_delay_s: vec![],
            per_user_power_w: vec![],
            capacity_sum: 0.0,
        }];
        let csv = metrics_csv(&rows);
        assert!(csv.lines().nth(1).unwrap().contains("inf"));
    }
}
