//! Minimal deterministic SVG line and scatter plots.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{CliError, CliResult};
use crate::table::write_text;

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];
const MARGIN_LEFT: f64 = 78.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 52.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Marker {
    Line,
    Points,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub marker: Marker,
}

impl Series {
    pub fn line(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            label: label.into(),
            x,
            y,
            marker: Marker::Line,
        }
    }

    pub fn points(label: impl Into<String>, x: Vec<f64>, y: Vec<f64>) -> Self {
        Self {
            marker: Marker::Points,
            ..Self::line(label, x, y)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlotStyle {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub width: u32,
    pub height: u32,
}

impl Default for PlotStyle {
    fn default() -> Self {
        Self {
            title: String::new(),
            x_label: "x".into(),
            y_label: "y".into(),
            log_x: false,
            log_y: false,
            width: 640,
            height: 420,
        }
    }
}

fn validate(series: &[Series], style: &PlotStyle) -> CliResult<()> {
    if series.is_empty() || series.iter().all(|s| s.x.is_empty()) {
        return Err(CliError::Validation("plot needs at least one non-empty series".into()));
    }
    let mut problems = Vec::new();
    for s in series {
        if s.x.len() != s.y.len() {
            return Err(CliError::Validation(format!(
                "series `{}` has {} x values and {} y values",
                s.label,
                s.x.len(),
                s.y.len()
            )));
        }
        let mut bad = Vec::new();
        for (axis, values, log) in [("x", &s.x, style.log_x), ("y", &s.y, style.log_y)] {
            for (i, v) in values.iter().enumerate() {
                if !v.is_finite() || (log && *v <= 0.0) {
                    bad.push(format!("{axis}[{i}]"));
                }
            }
        }
        if !bad.is_empty() {
            problems.push(format!("series `{}`: {}", s.label, bad.join(", ")));
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Validation(format!(
            "non-finite (or non-positive on a log axis) values at {}",
            problems.join("; ")
        )));
    }
    Ok(())
}

struct Axis {
    lo: f64,
    hi: f64,
    log: bool,
}

impl Axis {
    fn new(values: impl Iterator<Item = f64>, log: bool) -> Self {
        let (mut lo, mut hi) = values
            .map(|v| if log { v.log10() } else { v })
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if log {
            lo = lo.floor();
            hi = hi.ceil();
        }
        if hi - lo <= 0.0 {
            let pad = if lo == 0.0 { 1.0 } else { 0.5 * lo.abs() };
            lo -= pad;
            hi += pad;
        }
        Self { lo, hi, log }
    }

    /// Fraction along the axis in `[0, 1]`.
    fn frac(&self, v: f64) -> f64 {
        let v = if self.log { v.log10() } else { v };
        (v - self.lo) / (self.hi - self.lo)
    }

    /// Tick positions (data units) with labels.
    fn ticks(&self) -> Vec<(f64, String)> {
        if self.log {
            let span = (self.hi - self.lo) as i64;
            let every = (span / 8 + 1).max(1);
            return (self.lo as i64..=self.hi as i64)
                .filter(|e| (e - self.lo as i64) % every == 0)
                .map(|e| (10f64.powi(e as i32), format!("1e{e}")))
                .collect();
        }
        let raw = (self.hi - self.lo) / 5.0;
        let mag = 10f64.powf(raw.log10().floor());
        let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
        let biggest = self.lo.abs().max(self.hi.abs());
        let scientific = !(1e-2..1e5).contains(&biggest);
        let decimals = (-step.log10().floor()).max(0.0) as usize;
        let mut out = Vec::new();
        let mut k = (self.lo / step).ceil();
        while k * step <= self.hi + 1e-9 * step {
            let v = k * step;
            let v = if v.abs() < 1e-12 * step { 0.0 } else { v };
            let label = if scientific { format!("{v:.2e}") } else { format!("{v:.decimals$}") };
            out.push((v, label));
            k += 1.0;
        }
        out
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Renders `series` as a standalone SVG document.
pub fn render_svg(series: &[Series], style: &PlotStyle) -> CliResult<String> {
    validate(series, style)?;
    let (w, h) = (style.width as f64, style.height as f64);
    let (pw, ph) = (w - MARGIN_LEFT - MARGIN_RIGHT, h - MARGIN_TOP - MARGIN_BOTTOM);
    if pw <= 0.0 || ph <= 0.0 {
        return Err(CliError::Validation(format!("plot size {}x{} is too small", style.width, style.height)));
    }
    let xa = Axis::new(series.iter().flat_map(|s| s.x.iter().copied()), style.log_x);
    let ya = Axis::new(series.iter().flat_map(|s| s.y.iter().copied()), style.log_y);
    let px = |v: f64| MARGIN_LEFT + xa.frac(v) * pw;
    let py = |v: f64| MARGIN_TOP + (1.0 - ya.frac(v)) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}" font-family="sans-serif" font-size="12">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>"#);
    if !style.title.is_empty() {
        let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, esc(&style.title));
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN_LEFT:.2}" y="{MARGIN_TOP:.2}" width="{pw:.2}" height="{ph:.2}" fill="none" stroke="black"/>"#
    );
    for (v, label) in xa.ticks() {
        let x = px(v);
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, MARGIN_TOP + ph, MARGIN_TOP + ph + 5.0);
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, MARGIN_TOP + ph + 18.0, esc(&label));
    }
    for (v, label) in ya.ticks() {
        let y = py(v);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{MARGIN_LEFT:.2}" y2="{y:.2}" stroke="black"/>"#, MARGIN_LEFT - 5.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, MARGIN_LEFT - 8.0, y + 4.0, esc(&label));
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + pw / 2.0,
        h - 12.0,
        esc(&style.x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        MARGIN_TOP + ph / 2.0,
        MARGIN_TOP + ph / 2.0,
        esc(&style.y_label)
    );
    for (k, ser) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        match ser.marker {
            Marker::Line => {
                let pts: Vec<String> = ser.x.iter().zip(&ser.y).map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y))).collect();
                let _ = writeln!(s, r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#, pts.join(" "));
            }
            Marker::Points => {
                for (x, y) in ser.x.iter().zip(&ser.y) {
                    let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#, px(*x), py(*y));
                }
            }
        }
        let ly = MARGIN_TOP + 14.0 + 16.0 * k as f64;
        let lx = MARGIN_LEFT + pw - 150.0;
        let _ = writeln!(s, r#"<line x1="{lx:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="3"/>"#, ly - 4.0, lx + 18.0, ly - 4.0);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{ly:.2}">{}</text>"#, lx + 24.0, esc(&ser.label));
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Writes the plot to `path`.
pub fn emit_plot(series: &[Series], style: &PlotStyle, path: &Path) -> CliResult<()> {
    let svg = render_svg(series, style)?;
    write_text(path, &svg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use spinfit::coherence::{hahn_decay, StretchedDecay};

    fn polyline(svg: &str) -> Vec<(f64, f64)> {
        let start = svg.find("points=\"").expect("polyline") + 8;
        let end = start + svg[start..].find('"').unwrap();
        svg[start..end]
            .split(' ')
            .map(|p| {
                let (x, y) = p.split_once(',').unwrap();
                (x.parse().unwrap(), y.parse().unwrap())
            })
            .collect()
    }

    fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
    }

    #[test]
    fn identity_series_is_monotone() {
        let x = linspace(0.0, 1.0, 21);
        let svg = render_svg(&[Series::line("y=x", x.clone(), x)], &PlotStyle::default()).unwrap();
        let pts = polyline(&svg);
        assert_eq!(pts.len(), 21);
        // svg y grows downward
        assert!(pts.windows(2).all(|w| w[1].0 > w[0].0 && w[1].1 < w[0].1));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
    }

    #[test]
    fn overlay_has_two_series_and_legend() {
        let x = linspace(0.0, 1.0, 5);
        let y: Vec<f64> = x.iter().map(|v| v * v).collect();
        let svg = render_svg(
            &[Series::points("measured", x.clone(), y.clone()), Series::line("fit", x, y)],
            &PlotStyle::default(),
        )
        .unwrap();
        assert_eq!(svg.matches("<circle").count(), 5);
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(svg.contains(">measured<") && svg.contains(">fit<"));
    }

    fn collinear(pts: &[(f64, f64)]) -> f64 {
        let (a, b) = (pts[0], pts[pts.len() - 1]);
        pts.iter()
            .map(|p| {
                let t = (p.0 - a.0) / (b.0 - a.0);
                (p.1 - (a.1 + t * (b.1 - a.1))).abs()
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn log_y_hahn_decay_is_straight_only_for_unit_stretch() {
        let style = PlotStyle {
            log_y: true,
            ..PlotStyle::default()
        };
        let t = linspace(0.0, 0.5e-3, 40);
        let curve = |n: f64| {
            let m = StretchedDecay::new(1.0, 0.2e-3, n).unwrap();
            let y: Vec<f64> = t.iter().map(|ti| hahn_decay(*ti, &m).unwrap()).collect();
            polyline(&render_svg(&[Series::line("decay", t.clone(), y)], &style).unwrap())
        };
        // pixel coordinates are rounded to 0.01
        assert!(collinear(&curve(1.0)) < 0.02);
        assert!(collinear(&curve(2.0)) > 10.0);
    }

    #[test]
    fn non_finite_values_are_listed() {
        let err = render_svg(
            &[Series::line("bad", vec![0.0, 1.0, f64::NAN], vec![1.0, f64::INFINITY, 2.0])],
            &PlotStyle::default(),
        )
        .unwrap_err()
        .to_string();
        assert!(err.contains("x[2]") && err.contains("y[1]") && err.contains("`bad`"), "{err}");
        let log = PlotStyle {
            log_y: true,
            ..PlotStyle::default()
        };
        assert!(render_svg(&[Series::line("z", vec![0.0, 1.0], vec![0.0, 1.0])], &log).unwrap_err().to_string().contains("y[0]"));
        assert!(render_svg(&[], &PlotStyle::default()).is_err());
    }

    #[test]
    fn deterministic() {
        let x = linspace(1.0, 100.0, 30);
        let y: Vec<f64> = x.iter().map(|v| v.ln()).collect();
        let style = PlotStyle {
            log_x: true,
            title: "a & b".into(),
            ..PlotStyle::default()
        };
        let a = render_svg(&[Series::line("ln", x.clone(), y.clone())], &style).unwrap();
        assert_eq!(a, render_svg(&[Series::line("ln", x, y)], &style).unwrap());
        assert!(a.contains("a &amp; b"));
    }
}
