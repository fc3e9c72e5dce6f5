//! Run artifacts: trajectory CSV, summary JSON and an SVG line chart.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ne_lab::topology::CoalitionLayout;
use ne_lab::trajectory::TrajectoryLog;
use serde::Serialize;

use crate::error::CliError;

/// Key/value pairs repeated in every emitted file.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub config_hash: String,
    pub alpha: f64,
    pub alpha_source: String,
    pub verdict: String,
    pub iterations: usize,
    pub record_every: usize,
    pub y_star: Option<Vec<f64>>,
}

impl RunMetadata {
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        let mut out = vec![
            ("scenario", self.scenario.clone()),
            ("config_hash", self.config_hash.clone()),
            ("alpha", format!("{:.16e}", self.alpha)),
            ("alpha_source", self.alpha_source.clone()),
            ("verdict", self.verdict.clone()),
            ("iterations", self.iterations.to_string()),
            ("record_every", self.record_every.to_string()),
        ];
        if let Some(y) = &self.y_star {
            let list: Vec<String> = y.iter().map(|v| format!("{v:.16e}")).collect();
            out.push(("y_star", list.join(" ")));
        }
        out
    }
}

/// The exact CSV header for `layout`.
pub fn csv_header(layout: &CoalitionLayout) -> Vec<String> {
    let mut header = vec!["k".to_string()];
    header.extend(layout.agents().map(|a| format!("x_{a}")));
    header.extend(["err_x", "err_psi", "err_xi", "err_xbar", "V"].map(String::from));
    header
}

fn num(v: f64) -> String {
    // 17 significant digits round-trip every f64
    format!("{v:.16e}")
}

fn csv_error(path: &Path, e: csv::Error) -> CliError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Runtime(format!("{}: {other:?}", path.display())),
    }
}

pub fn write_csv(path: &Path, layout: &CoalitionLayout, log: &TrajectoryLog, meta: &RunMetadata) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    for (key, value) in meta.entries() {
        writeln!(out, "# {key}: {value}").map_err(|e| CliError::io(path, e))?;
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(layout)).map_err(|e| csv_error(path, e))?;
    let mut record = Vec::with_capacity(layout.total() + 6);
    for row in &log.rows {
        record.clear();
        record.push(row.k.to_string());
        record.extend(row.x.iter().map(|&v| num(v)));
        match row.errors {
            Some(e) => record.extend([e.x, e.psi, e.xi, e.xbar].map(num)),
            None => record.extend(std::iter::repeat_n(String::new(), 4)),
        }
        record.push(row.lyapunov.map(num).unwrap_or_default());
        w.write_record(&record).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))
}

/// A trajectory CSV read back from disk.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTrajectory {
    pub metadata: Vec<(String, String)>,
    pub header: Vec<String>,
    pub k: Vec<usize>,
    pub x: Vec<Vec<f64>>,
    /// `err_x, err_psi, err_xi, err_xbar, V` per row; `None` for empty fields.
    pub extra: Vec<[Option<f64>; 5]>,
}

pub fn read_csv(path: &Path) -> Result<CsvTrajectory, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let metadata = text
        .lines()
        .take_while(|l| l.starts_with('#'))
        .filter_map(|l| l.trim_start_matches('#').trim().split_once(": "))
        .map(|(k, v)| (k.to_string(), v.to_string()))
        .collect();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers().map_err(|e| csv_error(path, e))?.iter().map(String::from).collect();
    let n = header.len().checked_sub(6).ok_or_else(|| CliError::Runtime(format!("{}: short header", path.display())))?;
    let bad = |what: &str| CliError::Runtime(format!("{}: cannot parse {what}", path.display()));
    let mut out = CsvTrajectory { metadata, header, k: Vec::new(), x: Vec::new(), extra: Vec::new() };
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        out.k.push(record[0].parse().map_err(|_| bad("k"))?);
        let x = (1..=n).map(|c| record[c].parse::<f64>().map_err(|_| bad("x"))).collect::<Result<Vec<_>, _>>()?;
        out.x.push(x);
        let mut extra = [None; 5];
        for (slot, field) in extra.iter_mut().zip(record.iter().skip(n + 1)) {
            if !field.is_empty() {
                *slot = Some(field.parse().map_err(|_| bad("error column"))?);
            }
        }
        out.extra.push(extra);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let file = File::create(path).map_err(|e| CliError::io(path, e))?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| CliError::Runtime(e.to_string()))?;
    out.write_all(b"\n").and_then(|_| out.flush()).map_err(|e| CliError::io(path, e))
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];
const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN: (f64, f64, f64, f64) = (70.0, 20.0, 40.0, 50.0); // left, right, top, bottom
/// Points per polyline before the chart is thinned.
const MAX_POINTS: usize = 2000;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Round-number tick positions covering `[lo, hi]`.
fn ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let raw = (hi - lo) / target as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

/// Renders `x_ij(k)` for every agent with dashed lines at each `y*_i`.
pub fn render_svg(layout: &CoalitionLayout, log: &TrajectoryLog, meta: &RunMetadata) -> String {
    let rows = &log.rows;
    let k_max = rows.last().map_or(1, |r| r.k).max(1) as f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in rows.iter().flat_map(|r| &r.x).chain(meta.y_star.iter().flatten()) {
        lo = lo.min(*v);
        hi = hi.max(*v);
    }
    if !(hi > lo) {
        lo -= 1.0;
        hi += 1.0;
    }
    let pad = 0.05 * (hi - lo);
    let (lo, hi) = (lo - pad, hi + pad);
    let (ml, mr, mt, mb) = MARGIN;
    let (pw, ph) = (WIDTH - ml - mr, HEIGHT - mt - mb);
    let sx = |k: f64| ml + pw * k / k_max;
    let sy = |v: f64| mt + ph * (hi - v) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(s, "<metadata>");
    for (key, value) in meta.entries() {
        let _ = writeln!(s, r#"  <entry key="{key}">{}</entry>"#, escape(&value));
    }
    let _ = writeln!(s, "</metadata>");
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{} (alpha = {}, {})</text>"#,
        WIDTH / 2.0,
        escape(&meta.scenario),
        meta.alpha,
        escape(&meta.verdict)
    );

    let _ = writeln!(s, r##"<g id="axes" stroke="#333" stroke-width="1" font-family="sans-serif" font-size="11">"##);
    let _ = writeln!(s, r#"  <line x1="{ml}" y1="{}" x2="{}" y2="{}"/>"#, mt + ph, ml + pw, mt + ph);
    let _ = writeln!(s, r#"  <line x1="{ml}" y1="{mt}" x2="{ml}" y2="{}"/>"#, mt + ph);
    for t in ticks(0.0, k_max, 8) {
        let x = sx(t);
        let _ = writeln!(s, r#"  <line x1="{x:.2}" y1="{}" x2="{x:.2}" y2="{}"/>"#, mt + ph, mt + ph + 4.0);
        let _ = writeln!(s, r#"  <text x="{x:.2}" y="{}" stroke="none" text-anchor="middle">{t}</text>"#, mt + ph + 16.0);
    }
    for t in ticks(lo, hi, 6) {
        let y = sy(t);
        let _ = writeln!(s, r#"  <line x1="{}" y1="{y:.2}" x2="{ml}" y2="{y:.2}"/>"#, ml - 4.0);
        let _ = writeln!(s, r#"  <text x="{}" y="{:.2}" stroke="none" text-anchor="end">{}</text>"#, ml - 6.0, y + 4.0, format_tick(t));
    }
    let _ = writeln!(s, r#"  <text x="{}" y="{}" stroke="none" text-anchor="middle">k</text>"#, ml + pw / 2.0, HEIGHT - 10.0);
    let _ = writeln!(s, "</g>");

    let stride = rows.len().div_ceil(MAX_POINTS).max(1);
    let _ = writeln!(s, r#"<g id="trajectories" fill="none" stroke-width="1.5">"#);
    for (a, agent) in layout.agents().enumerate() {
        let color = PALETTE[agent.coalition % PALETTE.len()];
        let mut points = String::new();
        for (idx, row) in rows.iter().enumerate() {
            if idx % stride == 0 || idx + 1 == rows.len() {
                let _ = write!(points, "{:.2},{:.2} ", sx(row.k as f64), sy(row.x[a]));
            }
        }
        let _ = writeln!(s, r#"  <polyline class="agent" id="x_{agent}" stroke="{color}" points="{}"/>"#, points.trim_end());
    }
    let _ = writeln!(s, "</g>");

    if let Some(y_star) = &meta.y_star {
        let _ = writeln!(s, r#"<g id="equilibrium" stroke-width="1" stroke-dasharray="6 4">"#);
        for (i, y) in y_star.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let yy = sy(*y);
            let _ = writeln!(
                s,
                r#"  <line class="reference" id="y_star_{}" x1="{ml}" y1="{yy:.2}" x2="{}" y2="{yy:.2}" stroke="{color}"/>"#,
                i + 1,
                ml + pw
            );
        }
        let _ = writeln!(s, "</g>");
    }
    let _ = writeln!(s, "</svg>");
    s
}

fn format_tick(t: f64) -> String {
    if t == 0.0 || (1e-3..1e5).contains(&t.abs()) {
        format!("{}", (t * 1e6).round() / 1e6)
    } else {
        format!("{t:.1e}")
    }
}

pub fn write_svg(path: &Path, layout: &CoalitionLayout, log: &TrajectoryLog, meta: &RunMetadata) -> Result<(), CliError> {
    std::fs::write(path, render_svg(layout, log, meta)).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_matches_layout() {
        let layout = CoalitionLayout::new(vec![2, 1]).unwrap();
        assert_eq!(csv_header(&layout).join(","), "k,x_1.1,x_1.2,x_2.1,err_x,err_psi,err_xi,err_xbar,V");
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(ticks(0.0, 100.0, 5), vec![0.0, 20.0, 40.0, 60.0, 80.0, 100.0]);
        let t = ticks(-0.3, 0.7, 8);
        assert_eq!(t.len(), 5);
        assert!(t.contains(&0.0) && (t[0] + 0.2).abs() < 1e-12);
    }

    #[test]
    fn number_format_round_trips() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE, f64::MAX] {
            assert_eq!(num(v).parse::<f64>().unwrap().to_bits(), v.to_bits());
        }
    }

    #[test]
    fn escape_covers_markup() {
        assert_eq!(escape("a<b & \"c\">"), "a&lt;b &amp; &quot;c&quot;&gt;");
    }
}
