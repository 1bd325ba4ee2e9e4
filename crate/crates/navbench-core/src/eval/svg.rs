//! Minimal SVG plot emission: trajectory overlays and change-rate traces.

use super::EpisodeLog;
use crate::world::{Scenario, Shape};
use std::fmt::Write;

const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

/// Map with obstacles, start/goal markers, and one polyline per episode.
pub fn trajectory_svg(scenario: &Scenario, logs: &[&EpisodeLog]) -> String {
    let b = scenario.map.bounds();
    let scale = 60.0;
    let margin = 20.0;
    let width = b.width() * scale + 2.0 * margin;
    let height = b.height() * scale + 2.0 * margin;
    let tx = |x: f64| margin + (x - b.min.x) * scale;
    let ty = |y: f64| height - margin - (y - b.min.y) * scale;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"##
    );
    let _ = writeln!(
        s,
        r##"<rect x="{:.1}" y="{:.1}" width="{:.1}" height="{:.1}" fill="white" stroke="black" stroke-width="2"/>"##,
        tx(b.min.x),
        ty(b.max.y),
        b.width() * scale,
        b.height() * scale
    );
    for shape in scenario.map.obstacles() {
        match shape {
            Shape::Polygon(verts) => {
                let pts: Vec<String> = verts
                    .iter()
                    .map(|v| format!("{:.1},{:.1}", tx(v.x), ty(v.y)))
                    .collect();
                let _ = writeln!(
                    s,
                    r##"<polygon points="{}" fill="#b0b0b0" stroke="#606060"/>"##,
                    pts.join(" ")
                );
            }
            Shape::Circle { center, radius } => {
                let _ = writeln!(
                    s,
                    r##"<circle cx="{:.1}" cy="{:.1}" r="{:.1}" fill="#b0b0b0" stroke="#606060"/>"##,
                    tx(center.x),
                    ty(center.y),
                    radius * scale
                );
            }
        }
    }
    if let Some(start) = scenario.start {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.1}" cy="{:.1}" r="6" fill="#2ca02c"/>"##,
            tx(start.x),
            ty(start.y)
        );
    }
    if let Some(goal) = scenario.goal {
        let _ = writeln!(
            s,
            r##"<circle cx="{:.1}" cy="{:.1}" r="8" fill="none" stroke="#d62728" stroke-width="3"/>"##,
            tx(goal.x),
            ty(goal.y)
        );
    }
    for (i, log) in logs.iter().enumerate() {
        if log.rows.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = log
            .rows
            .iter()
            .map(|r| format!("{:.1},{:.1}", tx(r.x), ty(r.y)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"/>"##,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="14" fill="{color}">{}</text>"##,
            margin + 4.0,
            margin + 16.0 * (i as f64 + 1.0),
            log.policy
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Per-step change-rate traces, one polyline per labeled series, with a
/// reference line at the static-environment value 1.
pub fn vc_trace_svg(traces: &[(&str, &[f64])]) -> String {
    let width = 720.0;
    let height = 360.0;
    let margin = 40.0;
    let max_len = traces.iter().map(|(_, t)| t.len()).max().unwrap_or(1).max(2);
    let mut lo: f64 = 0.9;
    let mut hi: f64 = 1.1;
    for (_, t) in traces {
        for v in *t {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
    }
    let pad = 0.05 * (hi - lo).max(0.1);
    lo -= pad;
    hi += pad;
    let tx = |i: usize| margin + (width - 2.0 * margin) * i as f64 / (max_len - 1) as f64;
    let ty = |v: f64| height - margin - (height - 2.0 * margin) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r##"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}">"##
    );
    let _ = writeln!(
        s,
        r##"<rect x="0" y="0" width="{width:.0}" height="{height:.0}" fill="white"/>"##
    );
    // Axes and the v_c = 1 reference.
    let _ = writeln!(
        s,
        r##"<line x1="{m}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="black"/>"##,
        height - margin,
        width - margin,
        height - margin,
        m = margin
    );
    let _ = writeln!(
        s,
        r##"<line x1="{m}" y1="{m}" x2="{m}" y2="{:.1}" stroke="black"/>"##,
        height - margin,
        m = margin
    );
    let _ = writeln!(
        s,
        r##"<line x1="{:.1}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="#999999" stroke-dasharray="6 4"/>"##,
        margin,
        ty(1.0),
        width - margin,
        ty(1.0)
    );
    let _ = writeln!(
        s,
        r##"<text x="4" y="{:.1}" font-size="12">1.0</text>"##,
        ty(1.0) + 4.0
    );
    for (i, (label, trace)) in traces.iter().enumerate() {
        if trace.is_empty() {
            continue;
        }
        let color = COLORS[i % COLORS.len()];
        let pts: Vec<String> = trace
            .iter()
            .enumerate()
            .map(|(j, v)| format!("{:.1},{:.1}", tx(j), ty(*v)))
            .collect();
        let _ = writeln!(
            s,
            r##"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"##,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r##"<text x="{:.1}" y="{:.1}" font-size="14" fill="{color}">{label}</text>"##,
            width - margin - 150.0,
            margin + 16.0 * (i as f64 + 1.0)
        );
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::corner_scenario;

    #[test]
    fn svg_documents_are_well_formed_enough() {
        let scenario = corner_scenario();
        let svg = trajectory_svg(&scenario, &[]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("polygon"));

        let trace_a = [1.0, 1.1, 0.95, 1.02];
        let trace_b = [1.0, 1.3, 0.7, 1.4];
        let svg = vc_trace_svg(&[("a", &trace_a), ("b", &trace_b)]);
        assert!(svg.contains("polyline"));
        assert_eq!(svg.matches("<text").count(), 3); // two labels + axis tag
    }
}
