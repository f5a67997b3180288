//! Static SVG figures: per-variable intervals and per-method length boxplots.

use std::fmt::Write;

use crate::inference::{InferenceResult, Method};
use crate::simulation::StudyReport;

const W: f64 = 720.0;
const H: f64 = 420.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 70.0;

fn color(m: Method) -> &'static str {
    match m {
        Method::Naive => "#7f7f7f",
        Method::Bonferroni => "#8c564b",
        Method::TzV => "#1f77b4",
        Method::TzM => "#ff7f0e",
        Method::TzMs => "#d62728",
        Method::TzStabT => "#2ca02c",
        Method::TzStabL1 => "#9467bd",
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

struct Canvas {
    out: String,
}

impl Canvas {
    fn new(title: &str) -> Self {
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="13">{}</text>"#,
            (LEFT + W - RIGHT) / 2.0,
            esc(title)
        );
        Self { out }
    }

    fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, stroke: &str, width: f64) {
        let _ = writeln!(
            self.out,
            r#"<line x1="{x1:.2}" y1="{y1:.2}" x2="{x2:.2}" y2="{y2:.2}" stroke="{stroke}" stroke-width="{width}"/>"#
        );
    }

    fn text(&mut self, x: f64, y: f64, anchor: &str, s: &str) {
        let _ = writeln!(self.out, r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">{}</text>"#, esc(s));
    }

    fn rotated(&mut self, x: f64, y: f64, s: &str) {
        let _ = writeln!(
            self.out,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="end" transform="rotate(-40 {x:.2} {y:.2})">{}</text>"#,
            esc(s)
        );
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            (lo, hi) = (-1.0, 1.0);
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let pad = 0.08 * (hi - lo);
        Self { lo: lo - pad, hi: hi + pad }
    }

    /// Pixel row of v, clipped to the plot area.
    fn y(&self, v: f64) -> f64 {
        let t = ((v - self.lo) / (self.hi - self.lo)).clamp(0.0, 1.0);
        H - BOTTOM - t * (H - TOP - BOTTOM)
    }

    fn draw(&self, c: &mut Canvas, label: &str) {
        c.line(LEFT, TOP, LEFT, H - BOTTOM, "black", 1.0);
        c.line(LEFT, H - BOTTOM, W - RIGHT, H - BOTTOM, "black", 1.0);
        for k in 0..=5 {
            let v = self.lo + (self.hi - self.lo) * k as f64 / 5.0;
            let y = self.y(v);
            c.line(LEFT - 4.0, y, LEFT, y, "black", 1.0);
            c.text(LEFT - 6.0, y + 4.0, "end", &format!("{v:.2}"));
        }
        let _ = writeln!(
            c.out,
            r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
            (TOP + H - BOTTOM) / 2.0,
            (TOP + H - BOTTOM) / 2.0,
            esc(label)
        );
    }
}

fn legend(c: &mut Canvas, methods: &[Method]) {
    for (k, &m) in methods.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * k as f64;
        let x = W - RIGHT + 16.0;
        c.line(x, y - 4.0, x + 18.0, y - 4.0, color(m), 3.0);
        c.text(x + 24.0, y, "start", m.as_str());
    }
}

/// One vertical interval per (variable, method) with the point estimate
/// marked; infinite ends run to the frame and end in an open arrow.
pub fn interval_plot(rows: &[InferenceResult], title: &str) -> String {
    let mut c = Canvas::new(title);
    let mut vars: Vec<(usize, String)> = Vec::new();
    let mut methods: Vec<Method> = Vec::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        if !vars.iter().any(|v| v.0 == r.variable) {
            vars.push((r.variable, r.name.clone()));
        }
        if !methods.contains(&r.method) {
            methods.push(r.method);
        }
    }
    let ok: Vec<&InferenceResult> = rows.iter().filter(|r| r.is_ok()).collect();
    let axis = Axis::new(
        ok.iter()
            .flat_map(|r| [r.interval.lower, r.interval.upper, r.point_estimate]),
    );
    axis.draw(&mut c, "coefficient");
    if vars.is_empty() {
        c.text((LEFT + W - RIGHT) / 2.0, H / 2.0, "middle", "no selected variables");
        return c.finish();
    }
    let zero = axis.y(0.0);
    if axis.lo < 0.0 && axis.hi > 0.0 {
        let _ = writeln!(
            c.out,
            r##"<line x1="{LEFT}" y1="{zero:.2}" x2="{:.2}" y2="{zero:.2}" stroke="#bbbbbb" stroke-dasharray="4 3"/>"##,
            W - RIGHT
        );
    }
    let slot = (W - RIGHT - LEFT) / vars.len() as f64;
    let step = slot * 0.7 / methods.len().max(1) as f64;
    for (v, (j, name)) in vars.iter().enumerate() {
        let x0 = LEFT + slot * (v as f64 + 0.15) + step / 2.0;
        c.rotated(LEFT + slot * (v as f64 + 0.5), H - BOTTOM + 14.0, name);
        for r in ok.iter().filter(|r| r.variable == *j) {
            let k = methods.iter().position(|m| *m == r.method).unwrap_or(0);
            let x = x0 + step * k as f64;
            let col = color(r.method);
            let (ylo, yhi) = (axis.y(r.interval.lower), axis.y(r.interval.upper));
            c.line(x, ylo, x, yhi, col, 2.0);
            for (inf, y, dir) in [(r.interval.lower_infinite, ylo, 1.0), (r.interval.upper_infinite, yhi, -1.0)] {
                if inf || !(if dir > 0.0 { r.interval.lower } else { r.interval.upper }).is_finite() {
                    let _ = writeln!(
                        c.out,
                        r#"<polyline points="{:.2},{:.2} {x:.2},{y:.2} {:.2},{:.2}" fill="none" stroke="{col}" stroke-width="1.5"/>"#,
                        x - 4.0,
                        y - 6.0 * dir,
                        x + 4.0,
                        y - 6.0 * dir
                    );
                } else {
                    c.line(x - 3.0, y, x + 3.0, y, col, 1.5);
                }
            }
            if r.point_estimate.is_finite() {
                let _ = writeln!(
                    c.out,
                    r#"<circle cx="{x:.2}" cy="{:.2}" r="2.5" fill="{col}"/>"#,
                    axis.y(r.point_estimate)
                );
            }
        }
    }
    legend(&mut c, &methods);
    c.finish()
}

/// Boxplot of finite interval lengths per method, annotated with coverage
/// and the share of infinite intervals.
pub fn length_boxplot(report: &StudyReport, title: &str) -> String {
    let mut c = Canvas::new(title);
    let boxes: Vec<_> = report.methods.iter().collect();
    let axis = Axis::new(boxes.iter().flat_map(|s| [0.0, s.finite_length_box.min, s.finite_length_box.max]));
    axis.draw(&mut c, "interval length");
    let slot = (W - RIGHT - LEFT) / boxes.len().max(1) as f64;
    let methods: Vec<Method> = boxes.iter().map(|s| s.method).collect();
    for (k, s) in boxes.iter().enumerate() {
        let xc = LEFT + slot * (k as f64 + 0.5);
        let half = (slot * 0.3).min(30.0);
        let b = s.finite_length_box;
        let col = color(s.method);
        if b.median.is_finite() {
            c.line(xc, axis.y(b.min), xc, axis.y(b.q1), col, 1.0);
            c.line(xc, axis.y(b.q3), xc, axis.y(b.max), col, 1.0);
            c.line(xc - half / 2.0, axis.y(b.min), xc + half / 2.0, axis.y(b.min), col, 1.0);
            c.line(xc - half / 2.0, axis.y(b.max), xc + half / 2.0, axis.y(b.max), col, 1.0);
            let (yq3, yq1) = (axis.y(b.q3), axis.y(b.q1));
            let _ = writeln!(
                c.out,
                r#"<rect x="{:.2}" y="{yq3:.2}" width="{:.2}" height="{:.2}" fill="{col}" fill-opacity="0.25" stroke="{col}"/>"#,
                xc - half,
                2.0 * half,
                (yq1 - yq3).max(0.5)
            );
            c.line(xc - half, axis.y(b.median), xc + half, axis.y(b.median), col, 2.5);
        }
        c.rotated(xc, H - BOTTOM + 14.0, s.method.as_str());
        c.text(xc, TOP + 4.0, "middle", &format!("cov {:.2}", s.coverage));
        c.text(xc, TOP + 16.0, "middle", &format!("inf {:.0}%", 100.0 * s.infinite_proportion));
    }
    legend(&mut c, &methods);
    c.finish()
}
