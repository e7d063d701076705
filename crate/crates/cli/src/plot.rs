//! Static SVG line plots of a task's series.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, Result};

/// Straight line `y = slope·x + intercept` drawn over a series.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub slope: f64,
    pub intercept: f64,
    pub label: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub reference: Option<Reference>,
    /// Plot `log10` of both coordinates (refinement studies).
    pub log_log: bool,
}

impl Series {
    pub fn new(title: impl Into<String>, x_label: &str, y_label: &str, points: Vec<(f64, f64)>) -> Self {
        Series {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            points,
            reference: None,
            log_log: false,
        }
    }
}

/// Least-squares `(slope, intercept)`; `(0, y)` for fewer than two distinct x.
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    if points.is_empty() {
        return (0.0, 0.0);
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;

fn range(vals: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = vals.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    // flat data gets a symmetric window so it draws as a centred line
    let pad = if hi > lo { 0.05 * (hi - lo) } else { lo.abs().max(1.0) * 0.5 };
    (lo - pad, hi + pad)
}

/// Render a series as an SVG document.
pub fn render_svg(series: &Series) -> String {
    let tf = |v: f64| if series.log_log { v.log10() } else { v };
    let pts: Vec<(f64, f64)> = series
        .points
        .iter()
        .map(|&(x, y)| (tf(x), tf(y)))
        .filter(|p| p.0.is_finite() && p.1.is_finite())
        .collect();
    let (x0, x1) = range(pts.iter().map(|p| p.0));
    let (y0, y1) = range(pts.iter().map(|p| p.1));
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (W - LEFT - RIGHT);
    let py = |y: f64| H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(&series.title));
    // axes box and tick labels at the ends
    let _ = writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    let log = if series.log_log { "log10 " } else { "" };
    for (v, anchor, x) in [(x0, "start", LEFT), (x1, "end", W - RIGHT)] {
        let _ = writeln!(s, r#"<text x="{x}" y="{}" text-anchor="{anchor}">{v:.4e}</text>"#, H - BOTTOM + 16.0);
    }
    for (v, y) in [(y0, H - BOTTOM), (y1, TOP + 10.0)] {
        let _ = writeln!(s, r#"<text x="{}" y="{y}" text-anchor="end">{v:.4e}</text>"#, LEFT - 4.0);
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{log}{}</text>"#,
        W / 2.0,
        H - 20.0,
        escape(&series.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{log}{}</text>"#,
        H / 2.0,
        H / 2.0,
        escape(&series.y_label)
    );
    if !pts.is_empty() {
        let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.3},{:.3}", px(x), py(y))).collect();
        let _ = writeln!(s, r#"<polyline fill="none" stroke="steelblue" stroke-width="2" points="{}"/>"#, path.join(" "));
        for &(x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.3}" cy="{:.3}" r="2.5" fill="steelblue"/>"#, px(x), py(y));
        }
    }
    let (slope, _) = fit_line(&pts);
    let mut note_y = TOP + 16.0;
    let _ = writeln!(s, r#"<text x="{}" y="{note_y}">fitted slope = {slope:e}</text>"#, LEFT + 8.0);
    if let Some(r) = &series.reference {
        let line = |x: f64| r.slope * x + r.intercept;
        let _ = writeln!(
            s,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="firebrick" stroke-dasharray="6 4"/>"#,
            px(x0),
            py(line(x0)),
            px(x1),
            py(line(x1))
        );
        note_y += 16.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{note_y}" fill="firebrick">{} (slope {:e})</text>"#,
            LEFT + 8.0,
            escape(&r.label),
            r.slope
        );
    }
    s.push_str("</svg>\n");
    s
}

pub fn emit_plot(series: &Series, path: &Path) -> Result<()> {
    std::fs::write(path, render_svg(series)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_recovers_affine_data() {
        let pts: Vec<(f64, f64)> = (0..9).map(|i| (i as f64, 0.25 * i as f64 - 1.0)).collect();
        let (m, c) = fit_line(&pts);
        assert!((m - 0.25).abs() < 1e-14 && (c + 1.0).abs() < 1e-14);
        assert_eq!(fit_line(&[(1.0, 3.0)]), (0.0, 3.0));
    }

    #[test]
    fn constant_series_is_a_horizontal_line() {
        let svg = render_svg(&Series::new("c", "t", "y", vec![(0.0, 2.0), (1.0, 2.0), (2.0, 2.0)]));
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let ys: Vec<&str> = line.split('"').nth(7).unwrap().split(' ').map(|p| p.split(',').nth(1).unwrap()).collect();
        assert!(ys.windows(2).all(|w| w[0] == w[1]), "{ys:?}");
        assert!(svg.contains("fitted slope = 0e0"));
    }
}
