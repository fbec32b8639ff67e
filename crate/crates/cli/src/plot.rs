//! Minimal SVG line charts rendered straight from the CSV row data.

use cransim_core::sim::experiments::{ParetoPoint, SweepPointResult};
use std::collections::BTreeMap;
use std::fmt::Write as _;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 64.0;
const COLORS: &[&str] = &["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN + (v - self.x_min) / (self.x_max - self.x_min).max(1e-300) * (WIDTH - 2.0 * MARGIN)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN
            - (v - self.y_min) / (self.y_max - self.y_min).max(1e-300) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn axes(svg: &mut String, frame: &Frame, x_label: &str, y_label: &str, title: &str) {
    writeln!(
        svg,
        r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    )
    .unwrap();
    writeln!(
        svg,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN,
        t = MARGIN
    )
    .unwrap();
    for k in 0..=4 {
        let fx = frame.x_min + (frame.x_max - frame.x_min) * k as f64 / 4.0;
        let fy = frame.y_min + (frame.y_max - frame.y_min) * k as f64 / 4.0;
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{:.3e}</text>"#,
            frame.x(fx),
            HEIGHT - MARGIN + 18.0,
            fx
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="11" text-anchor="end">{:.3e}</text>"#,
            MARGIN - 6.0,
            frame.y(fy) + 4.0,
            fy
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<text x="{}" y="{}" font-size="13" text-anchor="middle">{x_label}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="16" y="{}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{}" y="28" font-size="15" text-anchor="middle">{title}</text>"#,
        WIDTH / 2.0
    )
    .unwrap();
}

/// One polyline per policy over the sweep, finite points only.
pub fn sweep_chart(rows: &[SweepPointResult], x_label: &str, y_label: &str, title: &str) -> String {
    let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
    for r in rows {
        if r.mean_metric.is_finite() {
            series
                .entry(r.policy.as_str())
                .or_default()
                .push((r.sweep_value, r.mean_metric));
        }
    }
    let points: Vec<(f64, f64)> = series.values().flatten().copied().collect();
    let mut svg = String::from(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="720" height="480" viewBox="0 0 720 480">"#,
    );
    if points.is_empty() {
        svg.push_str("</svg>");
        return svg;
    }
    let frame = Frame {
        x_min: points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min),
        x_max: points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max),
        y_min: 0.0,
        y_max: points.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max) * 1.05,
    };
    axes(&mut svg, &frame, x_label, y_label, title);
    for (idx, (name, mut pts)) in series.into_iter().enumerate() {
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let path: Vec<String> = pts
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", frame.x(*x), frame.y(*y)))
            .collect();
        let color = COLORS[idx % COLORS.len()];
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"#,
            path.join(" ")
        )
        .unwrap();
        for (x, y) in &pts {
            writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                frame.x(*x),
                frame.y(*y)
            )
            .unwrap();
        }
        writeln!(
            svg,
            r#"<text x="{}" y="{}" font-size="12" fill="{color}">{name}</text>"#,
            WIDTH - MARGIN - 120.0,
            MARGIN + 18.0 * (idx as f64 + 1.0)
        )
        .unwrap();
    }
    svg.push_str("</svg>");
    svg
}

/// Scatter of the achieved delay pairs over the weight sweep.
pub fn pareto_chart(points: &[ParetoPoint], title: &str) -> String {
    let finite: Vec<&ParetoPoint> = points
        .iter()
        .filter(|p| p.delay_s.0.is_finite() && p.delay_s.1.is_finite())
        .collect();
    let mut svg = String::from(
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="720" height="480" viewBox="0 0 720 480">"#,
    );
    if finite.is_empty() {
        svg.push_str("</svg>");
        return svg;
    }
    let frame = Frame {
        x_min: 0.0,
        x_max: finite.iter().map(|p| p.delay_s.0).fold(f64::NEG_INFINITY, f64::max) * 1.1,
        y_min: 0.0,
        y_max: finite.iter().map(|p| p.delay_s.1).fold(f64::NEG_INFINITY, f64::max) * 1.1,
    };
    axes(&mut svg, &frame, "user 1 delay (s)", "user 2 delay (s)", title);
    let path: Vec<String> = finite
        .iter()
        .map(|p| format!("{:.2},{:.2}", frame.x(p.delay_s.0), frame.y(p.delay_s.1)))
        .collect();
    writeln!(
        svg,
        r##"<polyline points="{}" fill="none" stroke="#1f77b4" stroke-width="1.5" stroke-dasharray="4 3"/>"##,
        path.join(" ")
    )
    .unwrap();
    for p in &finite {
        writeln!(
            svg,
            r##"<circle cx="{:.2}" cy="{:.2}" r="4" fill="#d62728"/>"##,
            frame.x(p.delay_s.0),
            frame.y(p.delay_s.1)
        )
        .unwrap();
        writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="10">({:.0},{:.0})</text>"#,
            frame.x(p.delay_s.0) + 6.0,
            frame.y(p.delay_s.1) - 6.0,
            p.beta.0,
            p.beta.1
        )
        .unwrap();
    }
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chart_skips_infinite_points() {
        let rows = vec![
            SweepPointResult {
                sweep_value: 1.0,
                policy: "joint".into(),
                mean_metric: 2.0,
                ci_low: 1.9,
                ci_high: 2.1,
                unstable_fraction: 0.0,
                per_user_delay_s: vec![],
                per_user_power_w: vec![],
                capacity_sum: 0.0,
            },
            SweepPointResult {
                sweep_value: 2.0,
                policy: "joint".into(),
                mean_metric: f64::INFINITY,
                ci_low: f64::INFINITY,
                ci_high: f64::INFINITY,
                unstable_fraction: 1.0,
                per_user_delay_s: vec![],
                per_user_power_w: vec![],
                capacity_sum: 0.0,
            },
        ];
        let svg = sweep_chart(&rows, "x", "y", "t");
        assert!(svg.contains("<polyline"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }
}
