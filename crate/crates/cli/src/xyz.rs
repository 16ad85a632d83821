//! Labeled xyz text files: one point per line, `x y z [label]`,
//! whitespace-separated decimal with an optional non-negative integer label.
//! Column count must be consistent within a file. Coordinates are written
//! with 17 significant digits so files round-trip exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use symcloud_core::geom::{Point3, PointCloud};

use crate::CliError;

/// Parses one labeled xyz file.
pub fn read_xyz(path: &Path) -> Result<PointCloud, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    parse_xyz(&text, &path.display().to_string())
}

pub fn parse_xyz(text: &str, origin: &str) -> Result<PointCloud, CliError> {
    let mut points = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut columns: Option<usize> = None;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let at = || format!("{origin}:{}", lineno + 1);
        if fields.len() != 3 && fields.len() != 4 {
            return Err(CliError::new(format!(
                "{}: expected 3 or 4 columns, found {}",
                at(),
                fields.len()
            )));
        }
        match columns {
            None => columns = Some(fields.len()),
            Some(c) if c != fields.len() => {
                return Err(CliError::new(format!(
                    "{}: inconsistent column count ({} vs {c})",
                    at(),
                    fields.len()
                )))
            }
            _ => {}
        }
        let coord = |s: &str| -> Result<f64, CliError> {
            s.parse::<f64>()
                .map_err(|_| CliError::new(format!("{}: bad coordinate {s:?}", at())))
        };
        points.push(Point3::new(
            coord(fields[0])?,
            coord(fields[1])?,
            coord(fields[2])?,
        ));
        if fields.len() == 4 {
            let label: usize = fields[3]
                .parse()
                .map_err(|_| CliError::new(format!("{}: bad label {:?}", at(), fields[3])))?;
            labels.push(label);
        }
    }
    let labels = if columns == Some(4) { Some(labels) } else { None };
    PointCloud::new(points, labels)
        .map_err(|e| CliError::new(format!("{origin}: {e}")))
}

/// Writes a cloud with 17-significant-digit coordinates.
pub fn write_xyz(path: &Path, cloud: &PointCloud) -> Result<(), CliError> {
    write_xyz_with_header(path, cloud, None)
}

/// As [`write_xyz`] with an optional `#` header line (provenance metadata).
pub fn write_xyz_with_header(
    path: &Path,
    cloud: &PointCloud,
    header: Option<&str>,
) -> Result<(), CliError> {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(h);
        out.push('\n');
    }
    format_xyz(&mut out, cloud);
    let mut file = fs::File::create(path)
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
    file.write_all(out.as_bytes())
        .map_err(|e| CliError::new(format!("{}: {e}", path.display())))
}

pub fn format_xyz(out: &mut String, cloud: &PointCloud) {
    use std::fmt::Write as _;
    for (i, p) in cloud.points().iter().enumerate() {
        let _ = write!(out, "{:.16e} {:.16e} {:.16e}", p.x, p.y, p.z);
        if let Some(labels) = cloud.labels() {
            let _ = write!(out, " {}", labels[i]);
        }
        out.push('\n');
    }
}

/// Loads `*.xyz` files from a directory in lexicographic filename order.
/// Returns `(shape id, cloud)` pairs; the shape id is the file stem.
pub fn load_dataset(dir: &Path) -> Result<Vec<(String, PointCloud)>, CliError> {
    let mut paths: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| CliError::new(format!("{}: {e}", dir.display())))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.extension().and_then(|e| e.to_str()) == Some("xyz"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::new(format!(
            "{}: no .xyz files found",
            dir.display()
        )));
    }
    paths
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or_default()
                .to_string();
            Ok((id, read_xyz(&p)?))
        })
        .collect()
}
