//! DET curve output: `tau,apcer,bpcer` CSV and a small SVG plot with either
//! normal-deviate or linear axes.

use std::fmt::Write as _;
use std::str::FromStr;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::metrics::DetCurve;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AxisScale {
    /// Probit (inverse standard normal CDF) axes.
    #[default]
    NormalDeviate,
    Linear,
}

impl FromStr for AxisScale {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "normal" | "normal-deviate" | "probit" => Ok(AxisScale::NormalDeviate),
            "linear" => Ok(AxisScale::Linear),
            _ => Err(format!(
                "unknown axis scale `{s}` (expected normal or linear)"
            )),
        }
    }
}

pub fn det_csv(curve: &DetCurve) -> String {
    let mut out = String::from("tau,apcer,bpcer\n");
    for p in &curve.points {
        let _ = writeln!(out, "{},{},{}", p.tau, p.apcer, p.bpcer);
    }
    out
}

const WIDTH: f64 = 480.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PROBIT_MIN: f64 = 0.001;
const PROBIT_MAX: f64 = 0.99;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#ff7f0e", "#8c564b",
];

struct Axis {
    scale: AxisScale,
    normal: Normal,
}

impl Axis {
    fn new(scale: AxisScale) -> Self {
        Axis {
            scale,
            normal: Normal::standard(),
        }
    }

    fn transform(&self, p: f64) -> f64 {
        match self.scale {
            AxisScale::Linear => p,
            AxisScale::NormalDeviate => self.normal.inverse_cdf(p.clamp(PROBIT_MIN, PROBIT_MAX)),
        }
    }

    /// Maps a rate to `[0, 1]` along the plot axis.
    fn unit(&self, p: f64) -> f64 {
        let (lo, hi) = match self.scale {
            AxisScale::Linear => (0.0, 1.0),
            AxisScale::NormalDeviate => (self.transform(PROBIT_MIN), self.transform(PROBIT_MAX)),
        };
        (self.transform(p) - lo) / (hi - lo)
    }

    fn ticks(&self) -> Vec<f64> {
        match self.scale {
            AxisScale::Linear => (0..=5).map(|i| i as f64 * 0.2).collect(),
            AxisScale::NormalDeviate => vec![0.001, 0.01, 0.05, 0.1, 0.2, 0.4, 0.6, 0.8, 0.9, 0.99],
        }
    }
}

fn tick_label(p: f64) -> String {
    let pct = p * 100.0;
    if pct < 1.0 {
        format!("{pct:.1}")
    } else {
        format!("{pct:.0}")
    }
}

/// Renders one or more labelled DET curves (APCER on x, BPCER on y, in %).
pub fn det_svg(curves: &[(&str, &DetCurve)], scale: AxisScale) -> String {
    let axis = Axis::new(scale);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x = |p: f64| MARGIN + axis.unit(p) * plot_w;
    let y = |p: f64| HEIGHT - MARGIN - axis.unit(p) * plot_h;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for t in axis.ticks() {
        let (tx, ty) = (x(t), y(t));
        let _ = writeln!(
            s,
            r##"<line x1="{tx:.2}" y1="{:.2}" x2="{tx:.2}" y2="{:.2}" stroke="#ddd"/>"##,
            MARGIN,
            HEIGHT - MARGIN
        );
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}" stroke="#ddd"/>"##,
            MARGIN,
            WIDTH - MARGIN
        );
        let _ = writeln!(
            s,
            r#"<text x="{tx:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            HEIGHT - MARGIN + 16.0,
            tick_label(t)
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            ty + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{MARGIN}" y="{MARGIN}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">APCER (%)</text>"#,
        WIDTH / 2.0,
        HEIGHT - 16.0
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">BPCER (%)</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0
    );
    for (i, (label, curve)) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = curve
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", x(p.apcer), y(p.bpcer)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            pts.join(" ")
        );
        let ly = MARGIN + 14.0 + 14.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{ly:.2}" fill="{color}" text-anchor="end">{}</text>"#,
            WIDTH - MARGIN - 6.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}
