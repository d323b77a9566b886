//! Matrix CSV files, run reports and abundance-map images.
//!
//! Matrices are plain delimited text. Blank lines and lines starting with `#`
//! are ignored, so files can carry a provenance header. Values are written
//! with 17 significant digits, which round-trips every `f64` exactly.
//!
//! Run reports are TOML documents with a `schema_version` key; see
//! [`RunReport`].

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::InitSpec;
use crate::metrics::MatchResult;
use crate::model::{AbundanceMatrix, EndmemberMatrix, Mat, SolverConfig};
use crate::solver::SolverReport;
use crate::synth::SceneSpec;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// On-disk orientation of a matrix file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// One row per spectral band, one column per pixel.
    #[default]
    BandsByPixels,
    /// One row per pixel (or per spectrum).
    PixelsByBands,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixFormat {
    pub layout: Layout,
    pub delimiter: char,
    /// First non-comment line is a header and is skipped.
    pub header: bool,
}

impl Default for MatrixFormat {
    fn default() -> Self {
        Self {
            layout: Layout::BandsByPixels,
            delimiter: ',',
            header: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatrixFile {
    pub path: PathBuf,
    pub format: MatrixFormat,
}

impl MatrixFile {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self {
            path: path.into(),
            format: MatrixFormat::default(),
        }
    }

    pub fn with_layout(mut self, layout: Layout) -> Self {
        self.format.layout = layout;
        self
    }
}

/// Parses delimited text into a matrix in bands-by-pixels orientation.
pub fn parse_matrix(text: &str, format: &MatrixFormat, origin: impl AsRef<Path>) -> Result<Mat> {
    let origin = origin.as_ref();
    let parse_err = |line: usize, column: usize, message: String| Error::Parse {
        path: origin.to_path_buf(),
        line,
        column,
        message,
    };

    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    let mut header_pending = format.header;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let mut row = Vec::with_capacity(width.unwrap_or(0));
        for (col, field) in line.split(format.delimiter).enumerate() {
            let field = field.trim();
            let v: f64 = field.parse().map_err(|_| {
                parse_err(lineno + 1, col + 1, format!("not a number: {field:?}"))
            })?;
            if !v.is_finite() {
                return Err(parse_err(lineno + 1, col + 1, format!("non-finite value {field:?}")));
            }
            row.push(v);
        }
        match width {
            None => width = Some(row.len()),
            Some(w) if w != row.len() => {
                return Err(parse_err(
                    lineno + 1,
                    row.len().min(w) + 1,
                    format!("ragged row (data row {}): {} fields, expected {w}", rows.len() + 1, row.len()),
                ));
            }
            _ => {}
        }
        rows.push(row);
    }
    let Some(width) = width else {
        return Err(parse_err(0, 0, "empty matrix file".into()));
    };
    let m = Mat::from_fn(rows.len(), width, |i, j| rows[i][j]);
    Ok(match format.layout {
        Layout::BandsByPixels => m,
        Layout::PixelsByBands => m.transpose(),
    })
}

/// Loads a matrix file, returning it in bands-by-pixels orientation.
pub fn load_matrix(file: &MatrixFile) -> Result<Mat> {
    let text = fs::read_to_string(&file.path).map_err(|e| Error::io(&file.path, e))?;
    parse_matrix(&text, &file.format, &file.path)
}

/// Formats a bands-by-pixels matrix as delimited text in the requested layout.
pub fn format_matrix(m: &Mat, format: &MatrixFormat) -> String {
    let oriented;
    let m = match format.layout {
        Layout::BandsByPixels => m,
        Layout::PixelsByBands => {
            oriented = m.transpose();
            &oriented
        }
    };
    let mut out = String::with_capacity(m.len() * 24);
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(format.delimiter);
            }
            write!(out, "{:.16e}", m[(i, j)]).unwrap();
        }
        out.push('\n');
    }
    out
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Mat, format: &MatrixFormat) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, format_matrix(m, format)).map_err(|e| Error::io(path, e))
}

/// Where the observation matrix of a run came from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputEcho {
    pub path: PathBuf,
    pub format: MatrixFormat,
    pub allow_negative: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageShape {
    pub height: usize,
    pub width: usize,
}

/// Min-max scaling applied to one abundance map.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapScaling {
    pub column: usize,
    pub file: String,
    pub min: f64,
    pub max: f64,
    pub dynamic_range: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub wall_time_secs: f64,
}

/// Everything a run produced, and everything needed to rerun it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input: Option<InputEcho>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<ImageShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene: Option<SceneSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub init: Option<InitSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<SolverConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<SolverReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MatchResult>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub abundance_maps: Vec<MapScaling>,
    #[serde(default)]
    pub timings: Timings,
}

impl RunReport {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            schema_version: REPORT_SCHEMA_VERSION,
            command: command.into(),
            input: None,
            image: None,
            scene: None,
            init: None,
            config: None,
            solver: None,
            metrics: None,
            abundance_maps: Vec::new(),
            timings: Timings::default(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Report(e.to_string()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let report: Self = toml::from_str(text).map_err(|e| Error::Report(e.to_string()))?;
        if report.schema_version != REPORT_SCHEMA_VERSION {
            return Err(Error::Report(format!(
                "unsupported schema version {} (expected {REPORT_SCHEMA_VERSION})",
                report.schema_version
            )));
        }
        Ok(report)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_toml()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

pub const ENDMEMBERS_FILE: &str = "endmembers.csv";
pub const ABUNDANCES_FILE: &str = "abundances.csv";
pub const REPORT_FILE: &str = "report.toml";

/// Paths written by [`save_results`].
#[derive(Debug, Clone, PartialEq)]
pub struct SavedResults {
    pub endmembers: PathBuf,
    pub abundances: PathBuf,
    pub report: PathBuf,
    pub maps: Vec<PathBuf>,
}

/// Writes `endmembers.csv` (L×N), `abundances.csv` (K×N, one row per pixel),
/// optional per-endmember PGM abundance maps, and `report.toml`. The map
/// scalings are appended to the report before it is written.
pub fn save_results(
    phi: &EndmemberMatrix,
    w: &AbundanceMatrix,
    report: &mut RunReport,
    out_dir: impl AsRef<Path>,
    image: Option<ImageShape>,
) -> Result<SavedResults> {
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let fmt = MatrixFormat::default();
    let endmembers = out_dir.join(ENDMEMBERS_FILE);
    save_matrix(&endmembers, phi.as_matrix(), &fmt)?;
    let abundances = out_dir.join(ABUNDANCES_FILE);
    // K×N as stored: one row per pixel.
    fs::write(&abundances, format_matrix(w.as_matrix(), &fmt))
        .map_err(|e| Error::io(&abundances, e))?;

    let mut maps = Vec::new();
    report.abundance_maps.clear();
    if let Some(shape) = image {
        if shape.height * shape.width != w.nrows() {
            return Err(Error::dims(
                "image height × width vs pixel count",
                w.nrows(),
                shape.height * shape.width,
            ));
        }
        report.image = Some(shape);
        for j in 0..w.rank() {
            let name = format!("abundance_map_{j:02}.pgm");
            let path = out_dir.join(&name);
            let column: Vec<f64> = w.as_matrix().column(j).iter().copied().collect();
            let (text, min, max) = abundance_map_pgm(&column, shape);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
            report.abundance_maps.push(MapScaling {
                column: j,
                file: name,
                min,
                max,
                dynamic_range: max - min,
            });
            maps.push(path);
        }
    }
    let report_path = out_dir.join(REPORT_FILE);
    report.save(&report_path)?;
    Ok(SavedResults {
        endmembers,
        abundances,
        report: report_path,
        maps,
    })
}

pub const PGM_MAXVAL: u32 = 65535;
pub const PGM_MID_GRAY: u32 = 32768;

/// Plain (P2) 16-bit PGM of one abundance column, min-max scaled. Pixels are
/// laid out row-major. A constant map is rendered mid-gray. Returns the text
/// and the (min, max) used for scaling.
pub fn abundance_map_pgm(values: &[f64], shape: ImageShape) -> (String, f64, f64) {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    let mut out = format!("P2\n{} {}\n{}\n", shape.width, shape.height, PGM_MAXVAL);
    for row in 0..shape.height {
        for col in 0..shape.width {
            let v = values[row * shape.width + col];
            let level = if range > 0.0 {
                ((v - min) / range * PGM_MAXVAL as f64).round() as u32
            } else {
                PGM_MID_GRAY
            };
            if col > 0 {
                out.push(' ');
            }
            write!(out, "{level}").unwrap();
        }
        out.push('\n');
    }
    (out, min, max)
}

/// Parses a plain PGM back into (width, height, levels).
pub fn parse_pgm(text: &str) -> Result<(usize, usize, Vec<u32>)> {
    let bad = |m: &str| Error::Parse {
        path: PathBuf::from("<pgm>"),
        line: 0,
        column: 0,
        message: m.to_string(),
    };
    let mut tokens = text
        .lines()
        .filter(|l| !l.trim_start().starts_with('#'))
        .flat_map(str::split_whitespace);
    if tokens.next() != Some("P2") {
        return Err(bad("missing P2 magic"));
    }
    let mut next_num = || -> Result<u32> {
        tokens
            .next()
            .and_then(|t| t.parse().ok())
            .ok_or_else(|| bad("malformed header or pixel"))
    };
    let width = next_num()? as usize;
    let height = next_num()? as usize;
    let _maxval = next_num()?;
    let levels = (0..width * height).map(|_| next_num()).collect::<Result<_>>()?;
    Ok((width, height, levels))
}
