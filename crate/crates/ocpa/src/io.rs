//! File formats: trajectory dumps, result tables and occupation densities.
//!
//! Binary trajectory layout (all little-endian):
//!
//! | field   | type        |
//! |---------|-------------|
//! | magic   | `b"OCPA"`   |
//! | version | `u32` (= 1) |
//! | n_time  | `u64`       |
//! | d       | `u32`       |
//! | seed    | `u64`       |
//! | states  | `(n_time + 1) * d` x `f64`, row-major |
//!
//! The header does not carry `dt`; readers supply it.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ocpa_core::occupation::OccupationDensity;
use ocpa_core::{PathSample, SeedSpec};
use serde::Serialize;
use serde_json::{json, Value};

pub const MAGIC: &[u8; 4] = b"OCPA";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: String, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn format_err(path: &Path, message: impl Into<String>) -> IoError {
    IoError::Format {
        path: path.display().to_string(),
        message: message.into(),
    }
}

/// The seed field stores the base seed; the replication index is not part
/// of the header.
pub fn write_trajectory_binary(path: &Path, sample: &PathSample) -> Result<(), IoError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let seed = sample.seed().map_or(0, |s| s.base_seed);
    let mut header = Vec::with_capacity(28);
    header.extend_from_slice(MAGIC);
    header.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    header.extend_from_slice(&(sample.n_time() as u64).to_le_bytes());
    header.extend_from_slice(&(sample.dim() as u32).to_le_bytes());
    header.extend_from_slice(&seed.to_le_bytes());
    w.write_all(&header).map_err(io_err(path))?;
    for v in sample.states() {
        w.write_all(&v.to_le_bytes()).map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_trajectory_binary(path: &Path, dt: f64, tag: &str) -> Result<PathSample, IoError> {
    let mut bytes = Vec::new();
    fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(io_err(path))?;
    if bytes.len() < 28 || &bytes[..4] != MAGIC {
        return Err(format_err(path, "missing OCPA header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    let version = u32_at(4);
    if version != FORMAT_VERSION {
        return Err(format_err(
            path,
            format!("unsupported format version {version}"),
        ));
    }
    let n_time = u64_at(8) as usize;
    let dim = u32_at(16) as usize;
    let seed = u64_at(20);
    let expected = (n_time + 1) * dim * 8;
    let body = &bytes[28..];
    if body.len() != expected {
        return Err(format_err(
            path,
            format!("expected {expected} state bytes, found {}", body.len()),
        ));
    }
    let states = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
        .collect();
    PathSample::new(dim, dt, states, Some(SeedSpec::new(seed, 0)), tag)
        .map_err(|e| format_err(path, e.to_string()))
}

/// CSV with header `time,u_1,...,u_d`.
pub fn write_trajectory_csv(path: &Path, sample: &PathSample) -> Result<(), IoError> {
    let mut out = String::from("time");
    for k in 1..=sample.dim() {
        write!(out, ",u_{k}").unwrap();
    }
    out.push('\n');
    for (t, row) in sample.times().zip(sample.rows()) {
        write!(out, "{}", fmt_f64(t)).unwrap();
        for v in row {
            write!(out, ",{}", fmt_f64(*v)).unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(io_err(path))
}

pub fn read_trajectory_csv(path: &Path, tag: &str) -> Result<PathSample, IoError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut lines = BufReader::new(file).lines();
    let header = lines
        .next()
        .ok_or_else(|| format_err(path, "empty file"))?
        .map_err(io_err(path))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"time") || cols.len() < 2 {
        return Err(format_err(path, "header must be time,u_1,...,u_d"));
    }
    let dim = cols.len() - 1;
    let mut times = Vec::new();
    let mut states = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(io_err(path))?;
        let fields: Result<Vec<f64>, _> = line.split(',').map(str::parse::<f64>).collect();
        let fields = fields.map_err(|e| format_err(path, format!("line {}: {e}", i + 2)))?;
        if fields.len() != dim + 1 {
            return Err(format_err(
                path,
                format!("line {}: expected {} fields", i + 2, dim + 1),
            ));
        }
        times.push(fields[0]);
        states.extend_from_slice(&fields[1..]);
    }
    if times.len() < 2 {
        return Err(format_err(path, "need at least two rows"));
    }
    let dt = times[1] - times[0];
    PathSample::new(dim, dt, states, None, tag).map_err(|e| format_err(path, e.to_string()))
}

/// Shortest representation that round-trips.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// A result table: `#`-prefixed metadata lines, then a CSV header and rows.
#[derive(Clone, Debug, Serialize)]
pub struct Table {
    pub name: String,
    pub meta: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &str, columns: &[&str]) -> Self {
        Self {
            name: name.to_owned(),
            meta: Vec::new(),
            columns: columns.iter().map(|c| (*c).to_owned()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn meta(mut self, line: impl Into<String>) -> Self {
        self.meta.push(line.into());
        self
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for m in &self.meta {
            writeln!(out, "# {m}").unwrap();
        }
        writeln!(out, "{}", self.columns.join(",")).unwrap();
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(csv_cell).collect();
            writeln!(out, "{}", cells.join(",")).unwrap();
        }
        out
    }

    pub fn to_json(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                let obj: serde_json::Map<String, Value> = self
                    .columns
                    .iter()
                    .cloned()
                    .zip(r.iter().cloned())
                    .collect();
                Value::Object(obj)
            })
            .collect();
        json!({ "meta": self.meta, "columns": self.columns, "rows": rows })
    }
}

fn csv_cell(v: &Value) -> String {
    match v {
        Value::Number(n) if n.is_f64() => fmt_f64(n.as_f64().unwrap()),
        Value::Number(n) => n.to_string(),
        Value::String(s) if s.contains(',') || s.contains('"') => {
            format!("\"{}\"", s.replace('"', "\"\""))
        }
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        other => other.to_string(),
    }
}

pub fn occupation_sidecar(density: &OccupationDensity) -> Value {
    json!({
        "box_lo": density.lo(),
        "box_hi": density.hi(),
        "bins_per_axis": density.bins(),
        "horizon": density.horizon(),
        "out_of_box_mass": density.out_of_box(),
    })
}

pub fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err(parent))?;
    }
    fs::write(path, contents).map_err(io_err(path))
}
