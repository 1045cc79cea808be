//! CSV and SVG output.
//!
//! CSV files carry no timestamps so identical runs give identical bytes;
//! run metadata goes to a JSON sidecar next to the CSV instead.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::sweep::{Crossing, Metadata, Series, SweepCell, SweepResult};
use super::tables::{BoundsTable, SensitivityTable, WeightsTable};
use super::config::Mode;
use crate::error::{Error, Result};

/// Anything the harness can write.
#[derive(Debug, Clone, PartialEq)]
pub enum Report {
    Sweep(SweepResult),
    Weights(WeightsTable),
    Sensitivity(SensitivityTable),
    Bounds(BoundsTable),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Svg,
}

impl std::str::FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Config(format!("unknown format {other:?}"))),
        }
    }
}

/// Float with 17 significant digits; infinities as `inf`/`-inf`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

fn opt_float(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

pub const SWEEP_HEADER: [&str; 10] = [
    "series",
    "s",
    "m",
    "trials",
    "successes",
    "unconverged",
    "rate",
    "predicted",
    "predicted_low",
    "predicted_high",
];

fn write_rows(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Numerical(e.to_string()))
}

pub fn to_csv(report: &Report) -> Result<String> {
    match report {
        Report::Sweep(r) => write_rows(
            &SWEEP_HEADER,
            r.cells.iter().map(|c| {
                vec![
                    c.series.as_str().to_string(),
                    c.s.to_string(),
                    c.m.to_string(),
                    c.trials.to_string(),
                    c.successes.to_string(),
                    c.unconverged.to_string(),
                    format_float(c.rate()),
                    format_float(c.predicted),
                    format_float(c.predicted_low),
                    format_float(c.predicted_high),
                ]
            }),
        ),
        Report::Weights(t) => write_rows(
            &["k", "alpha", "omega", "omega_relative", "residual", "error"],
            t.rows.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    format_float(r.alpha),
                    opt_float(r.omega),
                    opt_float(r.omega_relative),
                    opt_float(r.residual),
                    r.error.clone().unwrap_or_default(),
                ]
            }),
        ),
        Report::Sensitivity(t) => write_rows(
            &["k", "alpha", "c", "c_unshifted", "finite_difference", "flat", "error"],
            t.rows.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    format_float(r.alpha),
                    opt_float(r.c),
                    opt_float(r.c_unshifted),
                    opt_float(r.finite_difference),
                    r.flat.map(|f| f.to_string()).unwrap_or_default(),
                    r.error.clone().unwrap_or_default(),
                ]
            }),
        ),
        Report::Bounds(t) => write_rows(
            &["k", "q", "sigma", "m_hat", "t_star", "band_low", "band_high", "measurements"],
            t.rows.iter().map(|r| {
                vec![
                    r.k.to_string(),
                    r.q.to_string(),
                    format_float(r.sigma),
                    format_float(r.m_hat),
                    format_float(r.t_star),
                    format_float(r.band_low),
                    format_float(r.band_high),
                    format_float(r.measurements),
                ]
            }),
        ),
    }
}

#[derive(Deserialize)]
struct SweepRecord {
    series: Series,
    s: usize,
    m: usize,
    trials: usize,
    successes: usize,
    unconverged: usize,
    #[allow(dead_code)]
    rate: f64,
    predicted: f64,
    predicted_low: f64,
    predicted_high: f64,
}

/// Parses sweep CSV back into cells.
pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepCell>> {
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    reader
        .deserialize::<SweepRecord>()
        .map(|r| {
            let r = r?;
            Ok(SweepCell {
                series: r.series,
                s: r.s,
                m: r.m,
                trials: r.trials,
                successes: r.successes,
                unconverged: r.unconverged,
                predicted: r.predicted,
                predicted_low: r.predicted_low,
                predicted_high: r.predicted_high,
            })
        })
        .collect()
}

#[derive(Serialize)]
struct CrossingRecord {
    series: Series,
    s: usize,
    m50: Option<f64>,
    low: Option<f64>,
    high: Option<f64>,
    predicted: f64,
    predicted_low: f64,
}

impl From<&Crossing> for CrossingRecord {
    fn from(c: &Crossing) -> Self {
        Self {
            series: c.series,
            s: c.s,
            m50: c.m50,
            low: c.low,
            high: c.high,
            predicted: c.predicted,
            predicted_low: c.predicted_low,
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a> {
    metadata: &'a Metadata,
    set_weights: &'a [f64],
    crossings: Vec<CrossingRecord>,
}

/// Sidecar path for a CSV written to `path`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut name = path.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".meta.json");
    path.with_file_name(name)
}

/// JSON with the run metadata and crossings of a sweep.
pub fn sweep_sidecar(result: &SweepResult) -> Result<String> {
    let sidecar = Sidecar {
        metadata: &result.metadata,
        set_weights: &result.set_weights,
        crossings: result.crossings().iter().map(CrossingRecord::from).collect(),
    };
    Ok(serde_json::to_string_pretty(&sidecar)?)
}

pub fn render(report: &Report, format: Format) -> Result<String> {
    match format {
        Format::Csv => to_csv(report),
        Format::Svg => Ok(to_svg(report)),
    }
}

/// Writes `report` to `path`; sweeps written as CSV also get a sidecar.
pub fn emit(report: &Report, format: Format, path: &Path) -> Result<()> {
    fs::write(path, render(report, format)?)?;
    if let (Report::Sweep(r), Format::Csv) = (report, format) {
        fs::write(sidecar_path(path), sweep_sidecar(r)?)?;
    }
    Ok(())
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const STROKES: [&str; 4] = ["#000000", "#d62728", "#1f77b4", "#2ca02c"];

fn svg_open(title: &str, xlabel: &str, ylabel: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.1}" y="20" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + (WIDTH - LEFT - RIGHT) / 2.0,
        HEIGHT - 15.0,
        escape(xlabel)
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
        TOP + (HEIGHT - TOP - BOTTOM) / 2.0,
        escape(ylabel)
    );
    s
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick(value: f64) -> String {
    if value.fract() == 0.0 && value.abs() < 1e9 {
        format!("{value:.0}")
    } else {
        format!("{value:.3}")
    }
}

struct Axes {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Axes {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (HEIGHT - TOP - BOTTOM)
    }

    fn frame(&self, s: &mut String) {
        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{:.1}" height="{:.1}" fill="none" stroke="black"/>"#,
            WIDTH - LEFT - RIGHT,
            HEIGHT - TOP - BOTTOM
        );
        for i in 0..=4 {
            let f = i as f64 / 4.0;
            let x = self.x0 + f * (self.x1 - self.x0);
            let y = self.y0 + f * (self.y1 - self.y0);
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
                self.px(x),
                HEIGHT - BOTTOM + 18.0,
                tick(x)
            );
            let _ = writeln!(
                s,
                r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
                LEFT - 6.0,
                self.py(y) + 4.0,
                tick(y)
            );
        }
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

struct Line {
    label: String,
    points: Vec<(f64, f64)>,
}

fn line_plot(title: &str, xlabel: &str, ylabel: &str, lines: &[Line], vlines: &[(f64, usize)], y_range: Option<(f64, f64)>) -> String {
    let mut s = svg_open(title, xlabel, ylabel);
    let (x0, x1) = padded_range(lines.iter().flat_map(|l| l.points.iter().map(|p| p.0)));
    let (y0, y1) = y_range.unwrap_or_else(|| padded_range(lines.iter().flat_map(|l| l.points.iter().map(|p| p.1))));
    let axes = Axes { x0, x1, y0, y1 };
    axes.frame(&mut s);
    for &(x, color) in vlines {
        if x.is_finite() && x >= x0 && x <= x1 {
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{TOP}" x2="{:.2}" y2="{:.2}" stroke="{}" stroke-dasharray="4 3"/>"#,
                axes.px(x),
                axes.px(x),
                HEIGHT - BOTTOM,
                STROKES[color % STROKES.len()]
            );
        }
    }
    for (i, line) in lines.iter().enumerate() {
        let pts: Vec<String> = line
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y)))
            .collect();
        let color = STROKES[i % STROKES.len()];
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            LEFT + 10.0,
            TOP + 16.0 + 14.0 * i as f64,
            escape(&line.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Grayscale fill for a success rate: 0 is black, 1 is white.
pub fn gray(rate: f64) -> String {
    let g = (255.0 * rate.clamp(0.0, 1.0)).round() as u8;
    format!("rgb({g},{g},{g})")
}

fn heatmap(r: &SweepResult) -> String {
    let mut s = svg_open(
        &format!("Empirical success rate (n = {}, q = {})", r.structure.n(), r.structure.q()),
        "block sparsity s",
        "measurements m",
    );
    let mut s_vals: Vec<usize> = r.cells.iter().map(|c| c.s).collect();
    s_vals.sort_unstable();
    s_vals.dedup();
    let mut m_vals: Vec<usize> = r.cells.iter().map(|c| c.m).collect();
    m_vals.sort_unstable();
    m_vals.dedup();
    if s_vals.is_empty() || m_vals.is_empty() {
        s.push_str("</svg>\n");
        return s;
    }
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let cw = pw / s_vals.len() as f64;
    let ch = ph / m_vals.len() as f64;
    for c in &r.cells {
        let i = s_vals.binary_search(&c.s).unwrap_or(0);
        let j = m_vals.binary_search(&c.m).unwrap_or(0);
        let _ = writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
            LEFT + i as f64 * cw,
            HEIGHT - BOTTOM - (j + 1) as f64 * ch,
            cw,
            ch,
            gray(c.rate())
        );
    }
    // m mapped through the grid so non-uniform grids still line up with rows
    let y_of = |m: f64| -> f64 {
        let pos = if m <= m_vals[0] as f64 {
            0.0
        } else if m >= *m_vals.last().unwrap() as f64 {
            (m_vals.len() - 1) as f64
        } else {
            let j = m_vals.iter().position(|&v| v as f64 >= m).unwrap();
            let (a, b) = (m_vals[j - 1] as f64, m_vals[j] as f64);
            (j - 1) as f64 + (m - a) / (b - a)
        };
        HEIGHT - BOTTOM - (pos + 0.5) * ch
    };
    let pts: Vec<String> = s_vals
        .iter()
        .enumerate()
        .filter_map(|(i, &sv)| {
            let cell = r.cells.iter().find(|c| c.s == sv)?;
            Some(format!("{:.2},{:.2}", LEFT + (i as f64 + 0.5) * cw, y_of(cell.predicted)))
        })
        .collect();
    let _ = writeln!(
        s,
        r#"<polyline points="{}" fill="none" stroke="black" stroke-width="2"/>"#,
        pts.join(" ")
    );
    let _ = writeln!(s, r#"<rect x="{LEFT}" y="{TOP}" width="{pw:.1}" height="{ph:.1}" fill="none" stroke="black"/>"#);
    let label_every = s_vals.len().div_ceil(10);
    for (i, sv) in s_vals.iter().enumerate().step_by(label_every.max(1)) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{sv}</text>"#,
            LEFT + (i as f64 + 0.5) * cw,
            HEIGHT - BOTTOM + 18.0
        );
    }
    let label_every = m_vals.len().div_ceil(10);
    for (j, mv) in m_vals.iter().enumerate().step_by(label_every.max(1)) {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{mv}</text>"#,
            LEFT - 6.0,
            HEIGHT - BOTTOM - (j as f64 + 0.5) * ch + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

fn transition_plot(r: &SweepResult) -> String {
    let mut lines = Vec::new();
    let mut vlines = Vec::new();
    for (i, series) in [Series::Unit, Series::Optimal].into_iter().enumerate() {
        let cells: Vec<&SweepCell> = r.cells.iter().filter(|c| c.series == series).collect();
        if cells.is_empty() {
            continue;
        }
        lines.push(Line {
            label: format!("{} weights (predicted {:.1})", series.as_str(), cells[0].predicted),
            points: cells.iter().map(|c| (c.m as f64, c.rate())).collect(),
        });
        vlines.push((cells[0].predicted, i));
        vlines.push((cells[0].predicted_low, i));
    }
    line_plot(
        &format!("Success rate (n = {}, q = {})", r.structure.n(), r.structure.q()),
        "measurements m",
        "empirical success rate",
        &lines,
        &vlines,
        Some((0.0, 1.0)),
    )
}

fn per_k_lines<R>(rows: &[R], key: impl Fn(&R) -> usize, point: impl Fn(&R) -> Option<(f64, f64)>, label: &str) -> Vec<Line> {
    let mut ks: Vec<usize> = rows.iter().map(&key).collect();
    ks.dedup();
    ks.into_iter()
        .map(|k| Line {
            label: format!("{label} k = {k}"),
            points: rows.iter().filter(|r| key(r) == k).filter_map(&point).collect(),
        })
        .collect()
}

pub fn to_svg(report: &Report) -> String {
    match report {
        Report::Sweep(r) if r.mode == Mode::Heatmap => heatmap(r),
        Report::Sweep(r) => transition_plot(r),
        Report::Weights(t) => line_plot(
            "Optimal weight against accuracy",
            "accuracy alpha",
            "optimal weight",
            &per_k_lines(&t.rows, |r| r.k, |r| Some((r.alpha, r.omega?)), "weight"),
            &[],
            None,
        ),
        Report::Sensitivity(t) => line_plot(
            "Sensitivity of the optimal weight",
            "accuracy alpha",
            "c(k, alpha)",
            &per_k_lines(&t.rows, |r| r.k, |r| Some((r.alpha, r.c?)), "c"),
            &[],
            None,
        ),
        Report::Bounds(t) => line_plot(
            "Normalized measurement bound",
            "sparsity fraction sigma",
            "measurements per block",
            &per_k_lines(&t.rows, |r| r.k, |r| Some((r.sigma, r.m_hat)), "bound"),
            &[],
            None,
        ),
    }
}
