//! Minimal deterministic SVG plots: line/step/marker series on linear axes,
//! and heat maps on a rectangular grid.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#7f7f7f"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    /// Right-continuous steps, as for an empirical CDF.
    Step,
    DashedStep,
    Markers,
}

#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
    /// Palette slot; defaults to the series position.
    pub color: Option<usize>,
}

impl Series {
    pub fn new(label: &str, points: Vec<(f64, f64)>, style: Style) -> Self {
        Self { label: label.to_string(), points, style, color: None }
    }

    pub fn with_color(mut self, slot: usize) -> Self {
        self.color = Some(slot);
        self
    }
}

#[derive(Debug, Clone)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
}

struct Axis {
    lo: f64,
    hi: f64,
    ticks: Vec<f64>,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>) -> Self {
        let (mut lo, mut hi) = values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (lo, hi) = (0.0, 1.0);
        }
        if hi - lo < 1e-12 * (1.0 + lo.abs()) {
            let pad = if lo.abs() > 0.0 { 0.1 * lo.abs() } else { 0.5 };
            (lo, hi) = (lo - pad, hi + pad);
        }
        let step = nice_step((hi - lo) / 5.0);
        let (lo, hi) = ((lo / step).floor() * step, (hi / step).ceil() * step);
        let n = ((hi - lo) / step).round() as usize;
        let ticks = (0..=n).map(|k| lo + k as f64 * step).collect();
        Self { lo, hi, ticks }
    }

    fn map(&self, v: f64, a: f64, b: f64) -> f64 {
        a + (v - self.lo) / (self.hi - self.lo) * (b - a)
    }
}

fn nice_step(raw: f64) -> f64 {
    let mag = 10f64.powf(raw.log10().floor());
    let f = raw / mag;
    let nice = if f <= 1.0 {
        1.0
    } else if f <= 2.0 {
        2.0
    } else if f <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn label(v: f64) -> String {
    let s = format!("{:.6}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(out: &mut String, title: &str, x_label: &str, y_label: &str, x: &Axis, y: &Axis) {
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#);
    let _ = writeln!(out, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(out, r#"<rect x="{x0}" y="{y1}" width="{}" height="{}" fill="none" stroke="black"/>"#, x1 - x0, y0 - y1);
    for &t in &x.ticks {
        let px = x.map(t, x0, x1);
        let _ = writeln!(out, r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{:.2}" stroke="black"/>"#, y0 + 5.0);
        let _ = writeln!(out, r#"<text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, y0 + 18.0, label(t));
    }
    for &t in &y.ticks {
        let py = y.map(t, y0, y1);
        let _ = writeln!(out, r#"<line x1="{:.2}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/>"#, x0 - 5.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 8.0, py + 4.0, label(t));
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, HEIGHT - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

pub fn line_plot(plot: &Plot) -> String {
    let x = Axis::new(plot.series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let y = Axis::new(plot.series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    frame(&mut out, &plot.title, &plot.x_label, &plot.y_label, &x, &y);
    let mut legend = 0;
    // Rough text width at 12 px sans-serif.
    let longest = plot.series.iter().map(|s| s.label.chars().count()).max().unwrap_or(0);
    let legend_x = x1 - 24.0 - 6.5 * longest as f64;
    for (k, s) in plot.series.iter().enumerate() {
        let color = PALETTE[s.color.unwrap_or(k) % PALETTE.len()];
        let pts: Vec<(f64, f64)> =
            s.points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()).map(|p| (x.map(p.0, x0, x1), y.map(p.1, y0, y1))).collect();
        match s.style {
            Style::Markers => {
                for (px, py) in &pts {
                    let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{color}"/>"#);
                }
            }
            Style::Line | Style::Step | Style::DashedStep => {
                let mut path = String::new();
                for (i, (px, py)) in pts.iter().enumerate() {
                    if i == 0 {
                        let _ = write!(path, "M{px:.2},{py:.2}");
                    } else if matches!(s.style, Style::Step | Style::DashedStep) {
                        let _ = write!(path, " H{px:.2} V{py:.2}");
                    } else {
                        let _ = write!(path, " L{px:.2},{py:.2}");
                    }
                }
                let dash = if s.style == Style::DashedStep { r#" stroke-dasharray="5,4""# } else { "" };
                let _ = writeln!(out, r#"<path d="{path}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#);
            }
        }
        if s.label.is_empty() {
            continue;
        }
        let ly = TOP + 16.0 + 16.0 * legend as f64;
        legend += 1;
        let _ = writeln!(out, r#"<rect x="{:.2}" y="{:.2}" width="10" height="10" fill="{color}"/>"#, legend_x, ly - 9.0);
        let _ = writeln!(out, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, legend_x + 15.0, escape(&s.label));
    }
    out.push_str("</svg>\n");
    out
}

fn color(t: f64) -> String {
    // Dark blue → teal → yellow.
    const STOPS: [(f64, [f64; 3]); 3] = [(0.0, [68.0, 1.0, 84.0]), (0.5, [33.0, 145.0, 140.0]), (1.0, [253.0, 231.0, 37.0])];
    let t = if t.is_finite() { t.clamp(0.0, 1.0) } else { 0.0 };
    let k = if t <= 0.5 { 0 } else { 1 };
    let f = (t - STOPS[k].0) / (STOPS[k + 1].0 - STOPS[k].0);
    let c: Vec<u8> = (0..3).map(|i| (STOPS[k].1[i] + f * (STOPS[k + 1].1[i] - STOPS[k].1[i])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Heat map of `z[iy][ix]` over grid coordinates `xs` and `ys`.
pub fn heat_map(title: &str, x_label: &str, y_label: &str, xs: &[f64], ys: &[f64], z: &[Vec<f64>]) -> String {
    let (zmin, zmax) = z.iter().flatten().filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let span = if zmax > zmin { zmax - zmin } else { 1.0 };
    // Cell boundaries halfway between grid points.
    let half = |v: &[f64], i: usize| -> (f64, f64) {
        let lo = if i == 0 { v[0] - 0.5 * v.get(1).map_or(1.0, |n| n - v[0]) } else { 0.5 * (v[i - 1] + v[i]) };
        let hi = if i + 1 == v.len() { v[i] + 0.5 * (if i > 0 { v[i] - v[i - 1] } else { 1.0 }) } else { 0.5 * (v[i] + v[i + 1]) };
        (lo, hi)
    };
    let x = Axis::new((0..xs.len()).flat_map(|i| { let (a, b) = half(xs, i); [a, b] }));
    let y = Axis::new((0..ys.len()).flat_map(|i| { let (a, b) = half(ys, i); [a, b] }));
    let (x0, x1, y0, y1) = (LEFT, WIDTH - RIGHT, HEIGHT - BOTTOM, TOP);
    let mut out = String::new();
    frame(&mut out, title, x_label, y_label, &x, &y);
    for (iy, row) in z.iter().enumerate() {
        let (ya, yb) = half(ys, iy);
        let (pya, pyb) = (y.map(ya, y0, y1), y.map(yb, y0, y1));
        for (ix, v) in row.iter().enumerate() {
            let (xa, xb) = half(xs, ix);
            let (pxa, pxb) = (x.map(xa, x0, x1), x.map(xb, x0, x1));
            let _ = writeln!(
                out,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                pxa.min(pxb),
                pya.min(pyb),
                (pxb - pxa).abs(),
                (pyb - pya).abs(),
                color((v - zmin) / span)
            );
        }
    }
    let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">range [{}, {}]</text>"#, x1, TOP - 4.0, label(zmin), label(zmax));
    out.push_str("</svg>\n");
    out
}
