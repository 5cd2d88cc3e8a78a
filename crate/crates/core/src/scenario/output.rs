use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;

use super::{BranchRow, Check, Evaluation};
use crate::optics::{ScreenGrid, ScreenPattern};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
    /// SVG plot plus the CSV it was drawn from.
    Svg,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "svg" => Ok(OutputFormat::Svg),
            _ => Err(Error::config(format!("unknown format `{s}` (csv, json or svg)"))),
        }
    }
}

/// What a run wrote and which checks it ran.
#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub scenario: String,
    pub files: Vec<PathBuf>,
    pub checks: Vec<Check>,
}

impl RunReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }
}

/// Seventeen significant digits: enough to round-trip any `f64`.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn patterns_csv(patterns: &[ScreenPattern]) -> String {
    let mut out = String::from("x,density,label\n");
    for p in patterns {
        for (i, d) in p.density.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", num(p.grid.x(i)), num(*d), p.label);
        }
    }
    out
}

#[derive(Serialize)]
struct PatternDoc<'a> {
    label: &'a str,
    density: &'a [f64],
    envelope: &'a [f64],
}

#[derive(Serialize)]
struct PatternsDoc<'a> {
    grid: Option<ScreenGrid>,
    patterns: Vec<PatternDoc<'a>>,
}

fn patterns_json(patterns: &[ScreenPattern]) -> Result<String> {
    let doc = PatternsDoc {
        grid: patterns.first().map(|p| p.grid),
        patterns: patterns
            .iter()
            .map(|p| PatternDoc {
                label: &p.label,
                density: &p.density,
                envelope: &p.envelope,
            })
            .collect(),
    };
    to_json(&doc)
}

fn branches_csv(rows: &[BranchRow]) -> String {
    let mut out = String::from("grouping,name,detector,arrow,cat,weight\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.grouping,
            r.name,
            r.detector,
            r.arrow,
            r.cat,
            num(r.weight)
        );
    }
    out
}

const COLORS: [&str; 6] = ["#222222", "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"];

/// Minimal line plot: one polyline per pattern, ticks on both axes.
fn patterns_svg(title: &str, patterns: &[ScreenPattern]) -> String {
    let (w, h, m) = (720.0, 420.0, 50.0);
    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(out, r#"<text x="{m}" y="20">{title}</text>"#);
    let Some(first) = patterns.first() else {
        out.push_str("</svg>\n");
        return out;
    };
    let grid = first.grid;
    let y_max = patterns
        .iter()
        .flat_map(|p| p.density.iter().copied())
        .fold(0.0, f64::max)
        .max(f64::MIN_POSITIVE);
    let sx = |x: f64| m + (x - grid.x_min) / (grid.x_max - grid.x_min) * (w - 2.0 * m);
    let sy = |y: f64| h - m - y / y_max * (h - 2.0 * m);

    let _ = writeln!(
        out,
        r#"<path d="M{m} {} H{} M{m} {} V{m}" stroke="black" fill="none"/>"#,
        h - m,
        w - m,
        h - m
    );
    for k in 0..=6 {
        let x = grid.x_min + (grid.x_max - grid.x_min) * k as f64 / 6.0;
        let px = sx(x);
        let _ = writeln!(
            out,
            r#"<line x1="{px:.2}" y1="{}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{x:.1}</text>"#,
            h - m,
            h - m + 5.0,
            h - m + 18.0
        );
        let y = y_max * k as f64 / 6.0;
        let py = sy(y);
        let _ = writeln!(
            out,
            r#"<line x1="{}" y1="{py:.2}" x2="{m}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{y:.3}</text>"#,
            m - 5.0,
            m - 8.0,
            py + 4.0
        );
    }
    for (k, p) in patterns.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let mut pts = String::new();
        for (i, d) in p.density.iter().enumerate() {
            let _ = write!(pts, "{:.2},{:.2} ", sx(p.grid.x(i)), sy(*d));
        }
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1"/>"#,
            pts.trim_end()
        );
        let _ = writeln!(
            out,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            w - m - 90.0,
            m + 14.0 * k as f64,
            p.label
        );
    }
    out.push_str("</svg>\n");
    out
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| Error::Invariant(format!("serialization failed: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn put(dir: &Path, name: &str, contents: &str, files: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Error::io(&path, e))?;
    files.push(path);
    Ok(())
}

/// Writes the artifacts of `ev` into `dir` (created if missing):
///
/// * `patterns.{csv,json,svg}`: total and conditional screen patterns
/// * `branches.{csv,json}`: branch tables for both groupings
/// * `sampling.json`, `bell.json`: when the scenario has them
/// * `summary.json`, `checks.json`: always
pub fn write(ev: &Evaluation, dir: &Path, format: OutputFormat) -> Result<RunReport> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut files = Vec::new();
    if !ev.patterns.is_empty() {
        match format {
            OutputFormat::Csv => put(dir, "patterns.csv", &patterns_csv(&ev.patterns), &mut files)?,
            OutputFormat::Json => put(dir, "patterns.json", &patterns_json(&ev.patterns)?, &mut files)?,
            OutputFormat::Svg => {
                put(dir, "patterns.csv", &patterns_csv(&ev.patterns), &mut files)?;
                put(dir, "patterns.svg", &patterns_svg(&ev.scenario.name, &ev.patterns), &mut files)?;
            }
        }
    }
    if !ev.branches.is_empty() {
        match format {
            OutputFormat::Json => put(dir, "branches.json", &to_json(&ev.branches)?, &mut files)?,
            _ => put(dir, "branches.csv", &branches_csv(&ev.branches), &mut files)?,
        }
    }
    if let Some(s) = &ev.sampling {
        put(dir, "sampling.json", &to_json(s)?, &mut files)?;
    }
    if let Some(b) = &ev.bell {
        put(dir, "bell.json", &to_json(b)?, &mut files)?;
    }
    put(dir, "summary.json", &to_json(&ev.summary)?, &mut files)?;
    put(dir, "checks.json", &to_json(&ev.checks)?, &mut files)?;
    Ok(RunReport {
        scenario: ev.scenario.name.clone(),
        files,
        checks: ev.checks.clone(),
    })
}
