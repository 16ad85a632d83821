//! JSONL record schemas. Every output file starts with one meta line carrying
//! the command, seed, and effective configuration; data records follow one
//! per line.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{config::RunConfig, CliError};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Meta {
    pub tool: String,
    pub command: String,
    pub seed: u64,
    pub config: BTreeMap<String, String>,
    /// Fixed measurement conventions, recorded with every report.
    pub conventions: BTreeMap<String, String>,
}

impl Meta {
    pub fn new(command: &str, cfg: &RunConfig) -> Self {
        let mut conventions = BTreeMap::new();
        conventions.insert(
            "chamfer".into(),
            "symmetric mean of squared nearest-neighbor distances".into(),
        );
        conventions.insert(
            "emd".into(),
            "mean Euclidean distance under the optimal bijection".into(),
        );
        conventions.insert(
            "normalization".into(),
            "centroid at origin, max radius 1".into(),
        );
        Self {
            tool: format!("symcloud {}", env!("CARGO_PKG_VERSION")),
            command: command.to_string(),
            seed: cfg.seed,
            config: cfg.to_map(),
            conventions,
        }
    }

    /// Single-line `#` header embedded at the top of xyz outputs.
    pub fn xyz_header(&self) -> String {
        let config: Vec<String> = self.config.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "# {} {} seed={} {}",
            self.tool,
            self.command,
            self.seed,
            config.join(" ")
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
struct MetaLine {
    meta: Meta,
}

/// One detected symmetry: 12 plane reals (three `(normal, offset)` slots,
/// zero padding) in the shape's original frame, the fundamental-domain
/// indices into that part's points, and the validation residual measured on
/// the normalized part.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SymmetryRecord {
    pub shape: String,
    pub part: usize,
    pub planes: Vec<f64>,
    pub fd_indices: Vec<usize>,
    pub residual: f64,
}

/// One sampled generator set (12 plane reals, zero padding).
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SampledSymmetryRecord {
    pub sample: usize,
    pub planes: Vec<f64>,
}

/// Fitted assemblers for one shape: `9 * M` parameters part-major
/// (translation, rotation, scale per part) plus per-part RMS residuals.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AssemblerRecord {
    pub shape: String,
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
}

/// One SDI evaluation row.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SdiRecord {
    pub shape: String,
    pub part: Option<usize>,
    pub metric: String,
    pub raw: f64,
    pub scaled: f64,
}

pub fn write_jsonl<T: Serialize>(
    path: &Path,
    meta: &Meta,
    records: &[T],
) -> Result<(), CliError> {
    let mut out = Vec::new();
    let meta_line = serde_json::to_string(&MetaLine { meta: meta.clone() })
        .map_err(|e| CliError::new(e.to_string()))?;
    out.extend_from_slice(meta_line.as_bytes());
    out.push(b'\n');
    for r in records {
        let line = serde_json::to_string(r).map_err(|e| CliError::new(e.to_string()))?;
        out.extend_from_slice(line.as_bytes());
        out.push(b'\n');
    }
    let mut file = std::fs::File::create(path)
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    file.write_all(&out)
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<(Meta, Vec<T>), CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    let mut lines = std::io::BufReader::new(file).lines();
    let first = lines
        .next()
        .ok_or_else(|| CliError::new(format!("{}: empty file", path.display())))?
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    let meta: MetaLine = serde_json::from_str(&first)
        .map_err(|e| CliError::new(format!("{}: bad meta line: {e}", path.display())))?;
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let line = line.map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
        if line.trim().is_empty() {
            continue;
        }
        let record: T = serde_json::from_str(&line)
            .map_err(|e| CliError::new(format!("{}:{}: {e}", path.display(), i + 2)))?;
        records.push(record);
    }
    Ok((meta.meta, records))
}
