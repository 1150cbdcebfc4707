//! Static SVG convergence plots: one polyline, log-scaled y, wall-clock x.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use super::RunRecord;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotColumn {
    Loss,
    Gap,
    MaxDistance,
}

impl PlotColumn {
    pub fn name(self) -> &'static str {
        match self {
            PlotColumn::Loss => "loss",
            PlotColumn::Gap => "gap",
            PlotColumn::MaxDistance => "max_distance",
        }
    }

    fn value(self, r: &RunRecord) -> Option<f64> {
        match self {
            PlotColumn::Loss => Some(r.loss),
            PlotColumn::Gap => r.gap,
            PlotColumn::MaxDistance => Some(r.max_distance),
        }
    }
}

impl FromStr for PlotColumn {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "loss" => Ok(PlotColumn::Loss),
            "gap" => Ok(PlotColumn::Gap),
            "max_distance" => Ok(PlotColumn::MaxDistance),
            other => Err(format!("cannot plot column `{other}`")),
        }
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

/// Renders the SVG document. Missing, non-finite and non-positive values
/// cannot sit on a log axis and are skipped.
pub fn render_svg(records: &[RunRecord], column: PlotColumn) -> Result<String> {
    if records.len() < 2 {
        return Err(Error::InvalidConfig(format!(
            "a plot needs at least 2 records, got {}",
            records.len()
        )));
    }
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter_map(|r| {
            let y = column.value(r)?;
            (y.is_finite() && y > 0.0 && r.time_s.is_finite()).then(|| (r.time_s, y.log10()))
        })
        .collect();

    let (x0, x1) = span(points.iter().map(|p| p.0), 0.0, 1.0);
    let (y0, y1) = span(points.iter().map(|p| p.1), -1.0, 0.0);
    let (y0, y1) = (y0.floor(), y1.ceil().max(y0.floor() + 1.0));
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + (x - x0) / (x1 - x0) * plot_w;
    // Screen y grows downwards.
    let sy = |y: f64| MARGIN_T + (y1 - y) / (y1 - y0) * plot_h;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r##"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">
<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{plot_w}" height="{plot_h}" fill="none" stroke="black"/>"##
    );
    let decades = (y1 - y0) as i64;
    let step = (decades / 8).max(1);
    let mut d = y0 as i64;
    while d <= y1 as i64 {
        let y = sy(d as f64);
        let _ = writeln!(
            svg,
            r##"<line x1="{MARGIN_L}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"##,
            MARGIN_L + plot_w,
            MARGIN_L - 6.0,
            y + 4.0
        );
        d += step;
    }
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="start">{x0:.3}</text><text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">{x1:.3}</text>"##,
        MARGIN_L,
        HEIGHT - MARGIN_B + 16.0,
        MARGIN_L + plot_w,
        HEIGHT - MARGIN_B + 16.0
    );
    let _ = writeln!(
        svg,
        r##"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">time_s</text><text x="14" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"##,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 10.0,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        column.name()
    );
    svg.push_str(r##"<polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points=""##);
    for (i, (x, y)) in points.iter().enumerate() {
        if i > 0 {
            svg.push(' ');
        }
        let _ = write!(svg, "{:.3},{:.3}", sx(*x), sy(*y));
    }
    svg.push_str("\"/>\n</svg>\n");
    Ok(svg)
}

/// `(min, max)` of `values`, widened when degenerate; `default` when empty.
fn span(values: impl Iterator<Item = f64>, lo: f64, hi: f64) -> (f64, f64) {
    let (mut a, mut b) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if a > b {
        return (lo, hi);
    }
    if b - a <= f64::EPSILON * a.abs().max(1.0) {
        a -= 0.5;
        b += 0.5;
    }
    (a, b)
}

pub fn emit_plot(records: &[RunRecord], path: &Path, column: PlotColumn) -> Result<()> {
    let svg = render_svg(records, column)?;
    fs::write(path, svg).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
