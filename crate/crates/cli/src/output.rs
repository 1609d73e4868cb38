//! Output files, plot data and the run manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

/// A named column table written as CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Table { header, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|v| v.to_string()))?;
        }
        w.into_inner().map_err(|e| CliError::Output(e.to_string()))
    }
}

/// How a series is drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Style {
    Line,
    Scatter,
}

/// Two-column plot data.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<(f64, f64)>,
    pub style: Style,
}

#[derive(Debug, Clone, Serialize)]
struct OutputRecord {
    path: String,
    sha256: String,
}

/// The resolved record of a run.
#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: &'static str,
    outputs: Vec<OutputRecord>,
}

/// Collects output files; nothing touches the disk before the first write.
#[derive(Debug)]
pub struct Outputs {
    dir: PathBuf,
    records: Vec<OutputRecord>,
}

impl Outputs {
    pub fn new(dir: &Path) -> Self {
        Outputs {
            dir: dir.to_path_buf(),
            records: Vec::new(),
        }
    }

    fn write_bytes(&mut self, path: PathBuf, bytes: &[u8]) -> CliResult<PathBuf> {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                fs::create_dir_all(parent)?;
            }
        }
        fs::write(&path, bytes)?;
        let shown = path
            .strip_prefix(&self.dir)
            .map(|p| p.to_path_buf())
            .unwrap_or_else(|_| path.clone());
        self.records.push(OutputRecord {
            path: shown.to_string_lossy().into_owned(),
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(path)
    }

    /// Writes `table` to `name` inside the output directory.
    pub fn csv(&mut self, name: &str, table: &Table) -> CliResult<PathBuf> {
        let bytes = table.to_csv()?;
        self.write_bytes(self.dir.join(name), &bytes)
    }

    /// Writes `table` to an explicit path.
    pub fn csv_at(&mut self, path: &Path, table: &Table) -> CliResult<PathBuf> {
        let bytes = table.to_csv()?;
        self.write_bytes(path.to_path_buf(), &bytes)
    }

    pub fn json(&mut self, name: &str, value: &impl Serialize) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value)?;
        bytes.push(b'\n');
        self.write_bytes(self.dir.join(name), &bytes)
    }

    /// `<name>.dat` (two whitespace-separated columns) and `<name>.svg`.
    pub fn plot(&mut self, series: &Series) -> CliResult<()> {
        let (dat, svg) = emit_plot_data(series)?;
        self.write_bytes(self.dir.join(format!("{}.dat", series.name)), dat.as_bytes())?;
        self.write_bytes(self.dir.join(format!("{}.svg", series.name)), svg.as_bytes())?;
        Ok(())
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn finish(mut self, command: &str, config: serde_json::Value, seed: u64) -> CliResult<()> {
        let manifest = RunManifest {
            command: command.to_string(),
            config,
            seed,
            version: env!("CARGO_PKG_VERSION"),
            outputs: std::mem::take(&mut self.records),
        };
        let mut bytes = serde_json::to_vec_pretty(&manifest)?;
        bytes.push(b'\n');
        fs::create_dir_all(&self.dir)?;
        fs::write(self.dir.join("manifest.json"), bytes)?;
        Ok(())
    }
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const MARGIN: f64 = 60.0;

/// Data file and SVG rendering of a series.
pub fn emit_plot_data(series: &Series) -> CliResult<(String, String)> {
    let pts: Vec<(f64, f64)> = series.points.iter().copied().filter(|(x, y)| x.is_finite() && y.is_finite()).collect();
    if pts.is_empty() {
        return Err(CliError::Output(format!("series '{}' has no finite points", series.name)));
    }
    let mut dat = format!("# {} {}\n", series.x_label, series.y_label);
    for (x, y) in &series.points {
        writeln!(dat, "{x} {y}").expect("string write");
    }
    let range = |vals: Vec<f64>| {
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if hi > lo {
            (lo, hi)
        } else {
            (lo - 0.5, hi + 0.5)
        }
    };
    let (x0, x1) = range(pts.iter().map(|p| p.0).collect());
    let (y0, y1) = range(pts.iter().map(|p| p.1).collect());
    let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    )
    .expect("string write");
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).expect("string write");
    writeln!(
        svg,
        r#"<path d="M{m} {b} H{r} M{m} {b} V{m}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    )
    .expect("string write");
    for (v, x, y, anchor) in [
        (x0, sx(x0), HEIGHT - MARGIN + 18.0, "middle"),
        (x1, sx(x1), HEIGHT - MARGIN + 18.0, "middle"),
        (y0, MARGIN - 6.0, sy(y0) + 4.0, "end"),
        (y1, MARGIN - 6.0, sy(y1) + 4.0, "end"),
    ] {
        writeln!(svg, r#"<text x="{x:.1}" y="{y:.1}" font-size="11" text-anchor="{anchor}">{v:.4}</text>"#).expect("string write");
    }
    writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" font-size="13" text-anchor="middle">{}</text>"#,
        WIDTH / 2.0,
        HEIGHT - 15.0,
        escape(&series.x_label)
    )
    .expect("string write");
    writeln!(
        svg,
        r#"<text x="15" y="{:.1}" font-size="13" text-anchor="middle" transform="rotate(-90 15 {:.1})">{}</text>"#,
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(&series.y_label)
    )
    .expect("string write");
    match series.style {
        Style::Line => {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
            writeln!(svg, r#"<polyline points="{}" stroke="steelblue" stroke-width="1.5" fill="none"/>"#, path.join(" "))
                .expect("string write");
        }
        Style::Scatter => {
            for &(x, y) in &pts {
                writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, sx(x), sy(y)).expect("string write");
            }
        }
    }
    svg.push_str("</svg>\n");
    Ok((dat, svg))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: Vec<(f64, f64)>) -> Series {
        Series {
            name: "t".into(),
            x_label: "x".into(),
            y_label: "T_N".into(),
            points,
            style: Style::Line,
        }
    }

    #[test]
    fn plot_data_has_two_columns_and_labels() {
        let (dat, svg) = emit_plot_data(&series(vec![(0.0, 1.0), (1.0, 2.5)])).unwrap();
        assert_eq!(dat.lines().nth(1).unwrap(), "0 1");
        assert_eq!(dat.lines().count(), 3);
        assert!(svg.contains(">T_N<") && svg.contains("<polyline"));
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(emit_plot_data(&series(vec![])).is_err());
    }

    #[test]
    fn csv_has_a_header_row() {
        let mut t = Table::new(&["x", "phi_N"]);
        t.push(vec![0.5, -1.25]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "x,phi_N\n0.5,-1.25\n");
    }
}
