//! Minimal deterministic SVG writer for traces and summary bars.
//!
//! Coordinates are printed with three decimals, so equal inputs give
//! byte-identical files.

use std::fmt::Write as _;

use super::SessionStats;
use crate::sim::SimLog;

const PANEL_W: f64 = 640.0;
const PANEL_H: f64 = 180.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 28.0;
const MARGIN_B: f64 = 30.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// One stacked panel: a label and named series sharing the time axis.
pub struct Panel<'a> {
    pub label: &'a str,
    pub series: Vec<(&'a str, Vec<f64>)>,
    /// Horizontal reference line, e.g. the setpoint or the value 1.
    pub reference: Option<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (-1.0, 1.0);
    }
    if hi - lo < 1e-12 {
        let pad = lo.abs().max(1.0) * 0.05;
        return (lo - pad, hi + pad);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn header(out: &mut String, width: f64, height: f64, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{:.3}" y="16" font-size="13" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
}

/// Vertically stacked time-series panels.
pub fn stacked_panels(title: &str, t: &[f64], panels: &[Panel]) -> String {
    let height = 24.0 + PANEL_H * panels.len() as f64;
    let mut out = String::new();
    header(&mut out, PANEL_W, height, title);
    let (t0, t1) = finite_range(t.iter().copied());
    let plot_w = PANEL_W - MARGIN_L - MARGIN_R;
    let plot_h = PANEL_H - MARGIN_T - MARGIN_B;
    for (p, panel) in panels.iter().enumerate() {
        let top = 24.0 + p as f64 * PANEL_H + MARGIN_T;
        let values = panel.series.iter().flat_map(|(_, v)| v.iter().copied()).chain(panel.reference);
        let (y0, y1) = finite_range(values);
        let sx = |v: f64| MARGIN_L + (v - t0) / (t1 - t0) * plot_w;
        let sy = |v: f64| top + (y1 - v) / (y1 - y0) * plot_h;
        let _ = writeln!(
            out,
            r##"<rect x="{MARGIN_L:.3}" y="{top:.3}" width="{plot_w:.3}" height="{plot_h:.3}" fill="none" stroke="#444"/>"##
        );
        let _ = writeln!(out, r#"<text x="{:.3}" y="{:.3}">{}</text>"#, MARGIN_L, top - 6.0, escape(panel.label));
        for (v, anchor) in [(y1, top + 4.0), (y0, top + plot_h)] {
            let _ = writeln!(out, r#"<text x="{:.3}" y="{anchor:.3}" text-anchor="end">{v:.4}</text>"#, MARGIN_L - 4.0);
        }
        let bottom = top + plot_h + 14.0;
        let _ = writeln!(out, r#"<text x="{MARGIN_L:.3}" y="{bottom:.3}">{t0:.2} s</text>"#);
        let _ = writeln!(out, r#"<text x="{:.3}" y="{bottom:.3}" text-anchor="end">{t1:.2} s</text>"#, MARGIN_L + plot_w);
        if let Some(r) = panel.reference {
            let _ = writeln!(
                out,
                r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#888" stroke-dasharray="4 3"/>"##,
                MARGIN_L,
                sy(r),
                MARGIN_L + plot_w,
                sy(r)
            );
        }
        for (i, (name, v)) in panel.series.iter().enumerate() {
            let color = COLORS[i % COLORS.len()];
            let mut points = String::new();
            for (ti, vi) in t.iter().zip(v) {
                if vi.is_finite() {
                    let _ = write!(points, "{:.3},{:.3} ", sx(*ti), sy(*vi));
                }
            }
            let _ =
                writeln!(out, r#"<polyline fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#, points.trim_end());
            let lx = MARGIN_L + plot_w - 90.0;
            let ly = top + 14.0 + 13.0 * i as f64;
            let _ = writeln!(out, r#"<text x="{lx:.3}" y="{ly:.3}" fill="{color}">{}</text>"#, escape(name));
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Centroid error in pixels, log-area error and angle error against time.
pub fn error_plot(log: &SimLog) -> String {
    let t: Vec<f64> = log.records.iter().map(|r| r.t).collect();
    let col = |f: &dyn Fn(&crate::sim::StepRecord) -> f64| log.records.iter().map(f).collect::<Vec<_>>();
    let (ax, ay) = (log.intrinsics.alpha_x, log.intrinsics.alpha_y);
    let panels = [
        Panel {
            label: "centroid error [px]",
            series: vec![("x", col(&|r| r.error[0] * ax)), ("y", col(&|r| r.error[1] * ay))],
            reference: Some(0.0),
        },
        Panel { label: "log-area error", series: vec![("sigma", col(&|r| r.error[2]))], reference: Some(0.0) },
        Panel { label: "angle error [deg]", series: vec![("angle", col(&|r| r.angle_error_deg))], reference: Some(0.0) },
    ];
    stacked_panels(&format!("{}: feature errors", log.name), &t, &panels)
}

/// Constraint functions against time; both should settle at 1.
pub fn barrier_plot(log: &SimLog) -> String {
    let t: Vec<f64> = log.records.iter().map(|r| r.t).collect();
    let panels = [Panel {
        label: "constraint functions",
        series: vec![
            ("L1 (visibility)", log.records.iter().map(|r| r.barriers[0]).collect()),
            ("L2 (area)", log.records.iter().map(|r| r.barriers[1]).collect()),
        ],
        reference: Some(1.0),
    }];
    stacked_panels(&format!("{}: constraints", log.name), &t, &panels)
}

/// One panel per variable: a bar at the mean, a box of plus or minus one
/// standard deviation and whiskers at the extremes.
pub fn stats_bar_chart(title: &str, stats: &SessionStats) -> String {
    let rows = stats.rows();
    let cell = 150.0;
    let width = 40.0 + cell * rows.len() as f64;
    let height = 300.0;
    let mut out = String::new();
    header(&mut out, width, height, title);
    let (top, bottom) = (50.0, height - 50.0);
    for (i, (name, unit, s)) in rows.iter().enumerate() {
        let x0 = 20.0 + cell * i as f64;
        let cx = x0 + cell / 2.0;
        let hi = s.max.max(s.mean + s.std).max(1e-12) * 1.1;
        let sy = |v: f64| bottom - (v.max(0.0) / hi) * (bottom - top);
        let color = COLORS[i % COLORS.len()];
        let _ = writeln!(
            out,
            r##"<line x1="{:.3}" y1="{bottom:.3}" x2="{:.3}" y2="{bottom:.3}" stroke="#444"/>"##,
            x0 + 10.0,
            x0 + cell - 10.0
        );
        let _ = writeln!(
            out,
            r#"<rect x="{:.3}" y="{:.3}" width="50.000" height="{:.3}" fill="{color}" fill-opacity="0.6"/>"#,
            cx - 25.0,
            sy(s.mean),
            bottom - sy(s.mean)
        );
        let (lo, up) = (sy(s.mean - s.std), sy(s.mean + s.std));
        let _ = writeln!(
            out,
            r##"<rect x="{:.3}" y="{up:.3}" width="20.000" height="{:.3}" fill="none" stroke="#000"/>"##,
            cx - 10.0,
            lo - up
        );
        let _ = writeln!(out, r##"<line x1="{cx:.3}" y1="{:.3}" x2="{cx:.3}" y2="{:.3}" stroke="#000"/>"##, sy(s.min), sy(s.max));
        for v in [s.min, s.max] {
            let _ = writeln!(
                out,
                r##"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="#000"/>"##,
                cx - 8.0,
                sy(v),
                cx + 8.0,
                sy(v)
            );
        }
        let _ = writeln!(out, r#"<text x="{cx:.3}" y="{:.3}" text-anchor="middle">{} [{}]</text>"#, bottom + 16.0, name, unit);
        let _ = writeln!(out, r#"<text x="{cx:.3}" y="{:.3}" text-anchor="middle">mean {:.4}</text>"#, bottom + 30.0, s.mean);
    }
    out.push_str("</svg>\n");
    out
}
