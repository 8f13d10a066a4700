//! Report emission: numeric CSV tables, contour grids, manifest and summary
//! text, and an optional SVG rendering of the contour.
//!
//! CSV numbers are written with 17 significant digits so that re-parsing
//! reproduces every f64 bit-exactly; identical inputs therefore produce
//! byte-identical CSV files. Timings appear only in the manifest.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

fn io_err(path: &Path, source: std::io::Error) -> ReportError {
    ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Format with 17 significant digits; round-trips every finite f64.
pub fn format_g17(x: f64) -> String {
    format!("{x:.16e}")
}

/// Format with 3 significant digits, for human-facing summaries.
pub fn format_g3(x: f64) -> String {
    format!("{x:.2e}")
}

/// A numeric table with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(columns: Vec<S>) -> Self {
        Self {
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str(&self.columns.join(","));
        out.push('\n');
        for row in &self.rows {
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format_g17(*v));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv_str(text: &str, path: &Path) -> Result<Self, ReportError> {
        let mut lines = text.lines().enumerate();
        let Some((_, header)) = lines.next() else {
            return Err(ReportError::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: "empty file".into(),
            });
        };
        let columns: Vec<String> = header.split(',').map(|s| s.to_string()).collect();
        let mut rows = Vec::new();
        for (idx, line) in lines {
            if line.is_empty() {
                continue;
            }
            let mut row = Vec::with_capacity(columns.len());
            for tok in line.split(',') {
                let v = tok.parse::<f64>().map_err(|_| ReportError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("'{tok}' is not a number"),
                })?;
                row.push(v);
            }
            if row.len() != columns.len() {
                return Err(ReportError::Parse {
                    path: path.to_path_buf(),
                    line: idx + 1,
                    message: format!("expected {} fields, got {}", columns.len(), row.len()),
                });
            }
            rows.push(row);
        }
        Ok(Self { columns, rows })
    }
}

pub fn write_csv(path: &Path, table: &Table) -> Result<(), ReportError> {
    fs::write(path, table.to_csv_string()).map_err(|e| io_err(path, e))
}

pub fn parse_csv(path: &Path) -> Result<Table, ReportError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    Table::from_csv_str(&text, path)
}

/// Write a contour grid as CSV rows of (x, y, ratio).
pub fn emit_contour(path: &Path, rows: &[[f64; 3]]) -> Result<(), ReportError> {
    let mut table = Table::new(vec!["x", "y", "ratio"]);
    for r in rows {
        table.push_row(r.to_vec());
    }
    write_csv(path, &table)
}

fn lerp(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

/// Two-segment blue -> white -> red color map over t in [0, 1].
fn diverging_color(t: f64) -> (u8, u8, u8) {
    let t = t.clamp(0.0, 1.0);
    let (lo, mid, hi) = (
        (37.0, 52.0, 148.0),
        (247.0, 247.0, 247.0),
        (165.0, 0.0, 38.0),
    );
    let (r, g, b) = if t < 0.5 {
        let s = t * 2.0;
        (
            lerp(lo.0, mid.0, s),
            lerp(lo.1, mid.1, s),
            lerp(lo.2, mid.2, s),
        )
    } else {
        let s = (t - 0.5) * 2.0;
        (
            lerp(mid.0, hi.0, s),
            lerp(mid.1, hi.1, s),
            lerp(mid.2, hi.2, s),
        )
    };
    (r.round() as u8, g.round() as u8, b.round() as u8)
}

/// Render a contour grid as a deterministic scatter SVG.
pub fn contour_svg(rows: &[[f64; 3]]) -> String {
    const SIZE: f64 = 640.0;
    let mut svg = String::new();
    if rows.is_empty() {
        let _ = write!(
            svg,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\"/>\n"
        );
        return svg;
    }
    let (mut xmin, mut xmax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut ymin, mut ymax) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut vmin, mut vmax) = (f64::INFINITY, f64::NEG_INFINITY);
    for r in rows {
        xmin = xmin.min(r[0]);
        xmax = xmax.max(r[0]);
        ymin = ymin.min(r[1]);
        ymax = ymax.max(r[1]);
        vmin = vmin.min(r[2]);
        vmax = vmax.max(r[2]);
    }
    let extent = (xmax - xmin).max(ymax - ymin).max(1e-9);
    let pad = 0.06 * extent;
    let scale = SIZE / (extent + 2.0 * pad);
    let dot = (0.018 * extent * scale).max(2.0);
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SIZE}\" height=\"{SIZE}\" \
         viewBox=\"0 0 {SIZE} {SIZE}\">\n"
    );
    let _ = write!(
        svg,
        "<rect width=\"{SIZE}\" height=\"{SIZE}\" fill=\"#ffffff\"/>\n"
    );
    for r in rows {
        let px = (r[0] - xmin + pad) * scale;
        // SVG y grows downward; the plot keeps world +y up.
        let py = SIZE - (r[1] - ymin + pad) * scale;
        let t = if vmax > vmin {
            (r[2] - vmin) / (vmax - vmin)
        } else {
            0.5
        };
        let (cr, cg, cb) = diverging_color(t);
        let _ = write!(
            svg,
            "<circle cx=\"{px:.3}\" cy=\"{py:.3}\" r=\"{dot:.3}\" \
             fill=\"rgb({cr},{cg},{cb})\"/>\n"
        );
    }
    svg.push_str("</svg>\n");
    svg
}

/// One output file of a study report.
#[derive(Debug, Clone, PartialEq)]
pub enum Artifact {
    Csv(Table),
    Text(String),
    Svg(String),
}

impl Artifact {
    fn render(&self) -> String {
        match self {
            Artifact::Csv(t) => t.to_csv_string(),
            Artifact::Text(s) | Artifact::Svg(s) => s.clone(),
        }
    }
}

/// Everything a study run produces, ready to be written to an output
/// directory. Artifact content is a pure function of the study inputs; the
/// manifest additionally records elapsed time and environment facts.
#[derive(Debug, Clone)]
pub struct ReportBundle {
    pub label: String,
    pub config_sha256: String,
    pub threads: usize,
    pub elapsed_seconds: f64,
    /// (relative file name, content), in emission order.
    pub artifacts: Vec<(String, Artifact)>,
}

impl ReportBundle {
    /// Write every artifact plus `manifest.txt` into `dir` (created if
    /// missing). On any failure all files written by this call are removed
    /// before the error is returned, so a failed run leaves no partial
    /// output behind.
    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, ReportError> {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
        let mut written: Vec<PathBuf> = Vec::new();
        let result = self.write_inner(dir, &mut written);
        if result.is_err() {
            for path in &written {
                let _ = fs::remove_file(path);
            }
            return Err(result.unwrap_err());
        }
        Ok(written)
    }

    fn write_inner(&self, dir: &Path, written: &mut Vec<PathBuf>) -> Result<(), ReportError> {
        let mut manifest = String::new();
        let _ = writeln!(manifest, "study = {}", self.label);
        let _ = writeln!(manifest, "config_sha256 = {}", self.config_sha256);
        let _ = writeln!(
            manifest,
            "toolkit_version = {}",
            env!("CARGO_PKG_VERSION")
        );
        let _ = writeln!(manifest, "threads = {}", self.threads);
        let _ = writeln!(manifest, "elapsed_seconds = {:.3}", self.elapsed_seconds);
        let _ = writeln!(manifest, "files:");

        for (name, artifact) in &self.artifacts {
            let path = dir.join(name);
            let content = artifact.render();
            let digest = crate::config::hex_sha256(content.as_bytes());
            fs::write(&path, &content).map_err(|e| io_err(&path, e))?;
            written.push(path);
            let _ = writeln!(manifest, "  {name} sha256={digest}");
        }

        let manifest_path = dir.join("manifest.txt");
        fs::write(&manifest_path, &manifest).map_err(|e| io_err(&manifest_path, e))?;
        written.push(manifest_path);
        Ok(())
    }
}
