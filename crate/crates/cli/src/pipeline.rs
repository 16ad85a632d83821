//! Subcommand implementations: everything here is a pure function of the
//! input files and the run configuration, so outputs are reproducible
//! byte-for-byte. Shapes are processed in parallel and written in
//! lexicographic order.

use std::collections::BTreeMap;
use std::path::Path;

use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;

use symcloud_core::assembly::{apply_assembler, AssemblerSet};
use symcloud_core::detect::detect_symmetry_group;
use symcloud_core::geom::{normalize_cloud, resample_part, PointCloud};
use symcloud_core::metrics::{one_nna_with, sdi_default_with, sdi_with, MetricKind};
use symcloud_core::sampler::{sample_generator_set, VectorDb};
use symcloud_core::symgroup::{
    apply_group, fundamental_domain_unchecked, generate_group, GeneratorSet,
};

use crate::config::RunConfig;
use crate::records::{
    read_jsonl, write_jsonl, AssemblerRecord, Meta, SampledSymmetryRecord, SdiRecord,
    SymmetryRecord,
};
use crate::xyz::{load_dataset, write_xyz_with_header};
use crate::CliError;

/// Stable per-(shape, part) seed derivation (FNV-1a over the id, mixed with
/// the root seed).
fn derive_seed(root: u64, shape: &str, part: usize) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in shape.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h ^= part as u64;
    h = h.wrapping_mul(0x0000_0100_0000_01b3);
    root ^ h
}

fn core_err(context: &str, e: symcloud_core::Error) -> CliError {
    CliError::new(format!("{context}: {e}"))
}

/// Splits a cloud into per-part clouds (single part 0 when unlabeled).
fn parts_of(cloud: &PointCloud) -> Vec<(usize, PointCloud)> {
    (0..cloud.part_count())
        .filter_map(|j| {
            let (_, pts) = cloud.part(j);
            PointCloud::from_points(pts).ok().map(|c| (j, c))
        })
        .collect()
}

/// `detect`: one symmetry record per shape per part. Planes are stored in the
/// shape's original frame; fundamental-domain indices index into that part's
/// points in file order; the residual is measured on the normalized part.
pub fn detect_dir(in_dir: &Path, out: &Path, cfg: &RunConfig) -> Result<usize, CliError> {
    let shapes = load_dataset(in_dir)?;
    let results: Vec<Result<Vec<SymmetryRecord>, CliError>> = shapes
        .par_iter()
        .map(|(id, cloud)| {
            let mut records = Vec::new();
            for (part, part_cloud) in parts_of(cloud) {
                let context = format!("{id} part {part}");
                let record = detect_one_part(id, part, &part_cloud, cfg)
                    .map_err(|e| CliError::new(format!("{context}: {e}")))?;
                records.push(record);
            }
            Ok(records)
        })
        .collect();
    let mut records = Vec::new();
    for r in results {
        records.extend(r?);
    }
    write_jsonl(out, &Meta::new("detect", cfg), &records)?;
    Ok(records.len())
}

fn detect_one_part(
    shape: &str,
    part: usize,
    part_cloud: &PointCloud,
    cfg: &RunConfig,
) -> Result<SymmetryRecord, CliError> {
    // Tiny or degenerate parts carry the identity symmetry.
    let fallback = |residual: f64| SymmetryRecord {
        shape: shape.to_string(),
        part,
        planes: GeneratorSet::empty().to_flat().to_vec(),
        fd_indices: (0..part_cloud.len()).collect(),
        residual,
    };
    if part_cloud.len() < 8 {
        return Ok(fallback(0.0));
    }
    let Ok((normalized, frame)) = normalize_cloud(part_cloud) else {
        return Ok(fallback(0.0));
    };
    let det = detect_symmetry_group(&normalized, &cfg.detect_config(derive_seed(cfg.seed, shape, part)))
        .map_err(|e| CliError::new(e.to_string()))?;
    if !det.found {
        return Ok(fallback(0.0));
    }
    let group = generate_group(&det.generators, cfg.max_group_order)
        .map_err(|e| CliError::new(e.to_string()))?;
    let (domain, residual) = fundamental_domain_unchecked(&group, &normalized)
        .map_err(|e| CliError::new(e.to_string()))?;
    let original_frame = det
        .generators
        .map_planes(|p| frame.plane_from_normalized(p))
        .map_err(|e| CliError::new(e.to_string()))?;
    Ok(SymmetryRecord {
        shape: shape.to_string(),
        part,
        planes: original_frame.to_flat().to_vec(),
        fd_indices: domain.indices().to_vec(),
        residual,
    })
}

fn records_by_shape(records: Vec<SymmetryRecord>) -> BTreeMap<String, Vec<SymmetryRecord>> {
    let mut map: BTreeMap<String, Vec<SymmetryRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.shape.clone()).or_default().push(r);
    }
    for list in map.values_mut() {
        list.sort_by_key(|r| r.part);
    }
    map
}

/// `fd`: extracts the per-part fundamental-domain points named by the records
/// and writes one labeled cloud per shape.
pub fn fd_dir(in_dir: &Path, syms: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<usize, CliError> {
    let shapes = load_dataset(in_dir)?;
    let (_, records): (Meta, Vec<SymmetryRecord>) = read_jsonl(syms)?;
    let by_shape = records_by_shape(records);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::new(e.to_string()))?;
    let header = Meta::new("fd", cfg).xyz_header();
    let mut written = 0;
    for (id, cloud) in &shapes {
        let Some(shape_records) = by_shape.get(id) else {
            eprintln!("warning: {id}: no symmetry records, skipped");
            continue;
        };
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for record in shape_records {
            let (_, part_pts) = cloud.part(record.part);
            for &i in &record.fd_indices {
                if i >= part_pts.len() {
                    return Err(CliError::new(format!(
                        "{id} part {}: fd index {i} out of range ({} points)",
                        record.part,
                        part_pts.len()
                    )));
                }
                points.push(part_pts[i]);
                labels.push(record.part);
            }
        }
        let fd_cloud = PointCloud::new(points, Some(labels))
            .map_err(|e| core_err(id, e))?;
        write_xyz_with_header(&out_dir.join(format!("{id}.xyz")), &fd_cloud, Some(&header))?;
        written += 1;
    }
    Ok(written)
}

/// `reconstruct`: applies each part's symmetry group to its fundamental
/// domain and writes the union per shape.
pub fn reconstruct_dir(
    fd_dir: &Path,
    syms: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
) -> Result<usize, CliError> {
    let shapes = load_dataset(fd_dir)?;
    let (_, records): (Meta, Vec<SymmetryRecord>) = read_jsonl(syms)?;
    let by_shape = records_by_shape(records);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::new(e.to_string()))?;
    let header = Meta::new("reconstruct", cfg).xyz_header();
    let mut written = 0;
    for (id, fd_cloud) in &shapes {
        let Some(shape_records) = by_shape.get(id) else {
            eprintln!("warning: {id}: no symmetry records, skipped");
            continue;
        };
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for record in shape_records {
            let (_, part_pts) = fd_cloud.part(record.part);
            if part_pts.is_empty() {
                continue;
            }
            let flat: [f64; 12] = record
                .planes
                .clone()
                .try_into()
                .map_err(|_| CliError::new(format!("{id}: planes block is not 12 reals")))?;
            let gens = GeneratorSet::from_flat(&flat).map_err(|e| core_err(id, e))?;
            let group = generate_group(&gens, cfg.max_group_order).map_err(|e| core_err(id, e))?;
            let domain = PointCloud::from_points(part_pts).map_err(|e| core_err(id, e))?;
            let image = apply_group(&group, &domain, true);
            for p in image.points() {
                points.push(*p);
                labels.push(record.part);
            }
        }
        let recon = PointCloud::new(points, Some(labels)).map_err(|e| core_err(id, e))?;
        write_xyz_with_header(&out_dir.join(format!("{id}.xyz")), &recon, Some(&header))?;
        written += 1;
    }
    Ok(written)
}

/// `sdi`: per-part reports under recorded symmetries, or per-shape reports
/// against the default vertical mirror.
pub fn sdi_dir(
    in_dir: &Path,
    syms: Option<&Path>,
    kind: MetricKind,
    cfg: &RunConfig,
) -> Result<Vec<SdiRecord>, CliError> {
    let shapes = load_dataset(in_dir)?;
    let opts = cfg.metric_options();
    let metric_name = match kind {
        MetricKind::ChamferDistance => "cd",
        MetricKind::EarthMovers => "emd",
    };
    match syms {
        None => shapes
            .par_iter()
            .map(|(id, cloud)| {
                let report = sdi_default_with(cloud, kind, &opts)
                    .map_err(|e| core_err(id, e))?;
                Ok(SdiRecord {
                    shape: id.clone(),
                    part: None,
                    metric: metric_name.into(),
                    raw: report.raw,
                    scaled: report.scaled,
                })
            })
            .collect(),
        Some(syms_path) => {
            let (_, records): (Meta, Vec<SymmetryRecord>) = read_jsonl(syms_path)?;
            let clouds: BTreeMap<&str, &PointCloud> =
                shapes.iter().map(|(id, c)| (id.as_str(), c)).collect();
            records
                .par_iter()
                .map(|record| {
                    let cloud = clouds.get(record.shape.as_str()).ok_or_else(|| {
                        CliError::new(format!("{}: shape not found in --in", record.shape))
                    })?;
                    let (_, part_pts) = cloud.part(record.part);
                    let part_cloud =
                        PointCloud::from_points(part_pts).map_err(|e| core_err(&record.shape, e))?;
                    let flat: [f64; 12] = record.planes.clone().try_into().map_err(|_| {
                        CliError::new(format!("{}: planes block is not 12 reals", record.shape))
                    })?;
                    let gens =
                        GeneratorSet::from_flat(&flat).map_err(|e| core_err(&record.shape, e))?;
                    let report = sdi_with(&part_cloud, &gens, kind, &opts)
                        .map_err(|e| core_err(&record.shape, e))?;
                    Ok(SdiRecord {
                        shape: record.shape.clone(),
                        part: Some(record.part),
                        metric: metric_name.into(),
                        raw: report.raw,
                        scaled: report.scaled,
                    })
                })
                .collect()
        }
    }
}

/// Plain-text summary table for SDI records.
pub fn sdi_summary(records: &[SdiRecord]) -> String {
    use std::fmt::Write as _;
    let mut out = String::new();
    let _ = writeln!(out, "{:<24} {:>6} {:>14} {:>14}", "shape", "part", "raw", "scaled");
    for r in records {
        let part = r.part.map_or("-".to_string(), |p| p.to_string());
        let _ = writeln!(out, "{:<24} {:>6} {:>14.6e} {:>14.6e}", r.shape, part, r.raw, r.scaled);
    }
    if !records.is_empty() {
        let mean_scaled: f64 = records.iter().map(|r| r.scaled).sum::<f64>() / records.len() as f64;
        let max_scaled = records.iter().map(|r| r.scaled).fold(0.0f64, f64::max);
        let _ = writeln!(
            out,
            "summary: n = {}, mean scaled = {:.6e}, max scaled = {:.6e}",
            records.len(),
            mean_scaled,
            max_scaled
        );
    }
    out
}

/// `sample-sym`: draws generator sets from the empirical distribution of the
/// recorded 12-real symmetry blocks.
pub fn sample_sym(db_path: &Path, n: usize, out: &Path, cfg: &RunConfig) -> Result<usize, CliError> {
    let (_, records): (Meta, Vec<SymmetryRecord>) = read_jsonl(db_path)?;
    if records.is_empty() {
        return Err(CliError::new(format!("{}: no records", db_path.display())));
    }
    let db = VectorDb::new(records.iter().map(|r| r.planes.clone()).collect())
        .map_err(|e| CliError::new(e.to_string()))?;
    let sched = cfg.noise_schedule()?;
    let lcfg = cfg.langevin_config()?;
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let mut out_records = Vec::with_capacity(n);
    for sample in 0..n {
        let gens = sample_generator_set(&db, &sched, &lcfg, &mut rng)
            .map_err(|e| CliError::new(format!("sample {sample}: {e}")))?;
        out_records.push(SampledSymmetryRecord {
            sample,
            planes: gens.to_flat().to_vec(),
        });
    }
    write_jsonl(out, &Meta::new("sample-sym", cfg), &out_records)?;
    Ok(out_records.len())
}

/// `fit-assemblers`: least-squares fits of placed parts against their
/// canonical counterparts, one `9 * M` record per shape.
pub fn fit_assemblers_dir(
    in_dir: &Path,
    canon_dir: &Path,
    out: &Path,
    cfg: &RunConfig,
) -> Result<usize, CliError> {
    let placed = load_dataset(in_dir)?;
    let canon: BTreeMap<String, PointCloud> = load_dataset(canon_dir)?.into_iter().collect();
    let mut records = Vec::new();
    for (id, placed_cloud) in &placed {
        let Some(canon_cloud) = canon.get(id) else {
            eprintln!("warning: {id}: no canonical shape, skipped");
            continue;
        };
        if canon_cloud.part_count() != placed_cloud.part_count() {
            eprintln!(
                "warning: {id}: part count mismatch ({} vs {}), skipped",
                canon_cloud.part_count(),
                placed_cloud.part_count()
            );
            continue;
        }
        let mut params = Vec::new();
        let mut residuals = Vec::new();
        let mut ok = true;
        for part in 0..canon_cloud.part_count() {
            let (_, canon_pts) = canon_cloud.part(part);
            let (_, placed_pts) = placed_cloud.part(part);
            if canon_pts.len() != placed_pts.len() {
                eprintln!(
                    "warning: {id} part {part}: point count mismatch ({} vs {}), shape skipped",
                    canon_pts.len(),
                    placed_pts.len()
                );
                ok = false;
                break;
            }
            let canon_part = PointCloud::from_points(canon_pts).map_err(|e| core_err(id, e))?;
            let placed_part = PointCloud::from_points(placed_pts).map_err(|e| core_err(id, e))?;
            match symcloud_core::assembly::fit_assembler(&canon_part, &placed_part) {
                Ok(fit) => {
                    params.extend_from_slice(&fit.assembler.to_params());
                    residuals.push(fit.residual_rms);
                }
                Err(e) => {
                    eprintln!("warning: {id} part {part}: {e}, shape skipped");
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            records.push(AssemblerRecord {
                shape: id.clone(),
                params,
                residuals,
            });
        }
    }
    write_jsonl(out, &Meta::new("fit-assemblers", cfg), &records)?;
    Ok(records.len())
}

/// `assemble`: applies recorded assemblers to canonical parts and writes the
/// composed shapes.
pub fn assemble_dir(
    parts_dir: &Path,
    asm: &Path,
    out_dir: &Path,
    cfg: &RunConfig,
) -> Result<usize, CliError> {
    let shapes: BTreeMap<String, PointCloud> = load_dataset(parts_dir)?.into_iter().collect();
    let (_, records): (Meta, Vec<AssemblerRecord>) = read_jsonl(asm)?;
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::new(e.to_string()))?;
    let header = Meta::new("assemble", cfg).xyz_header();
    let mut written = 0;
    for record in &records {
        let Some(cloud) = shapes.get(&record.shape) else {
            eprintln!("warning: {}: no parts shape, skipped", record.shape);
            continue;
        };
        let set = AssemblerSet::from_flat(&record.params)
            .map_err(|e| core_err(&record.shape, e))?;
        if set.len() != cloud.part_count() {
            return Err(CliError::new(format!(
                "{}: {} assemblers for {} parts",
                record.shape,
                set.len(),
                cloud.part_count()
            )));
        }
        let mut points = Vec::new();
        let mut labels = Vec::new();
        for (part, assembler) in set.items().iter().enumerate() {
            let (_, pts) = cloud.part(part);
            let part_cloud = PointCloud::from_points(pts).map_err(|e| core_err(&record.shape, e))?;
            let placed = apply_assembler(assembler, &part_cloud);
            for p in placed.points() {
                points.push(*p);
                labels.push(part);
            }
        }
        let composed = PointCloud::new(points, Some(labels)).map_err(|e| core_err(&record.shape, e))?;
        write_xyz_with_header(
            &out_dir.join(format!("{}.xyz", record.shape)),
            &composed,
            Some(&header),
        )?;
        written += 1;
    }
    Ok(written)
}

/// `eval-1nna`: leave-one-out 1-NN accuracy between two shape directories.
pub fn eval_1nna_dirs(
    gen_dir: &Path,
    ref_dir: &Path,
    kind: MetricKind,
    cfg: &RunConfig,
) -> Result<f64, CliError> {
    let gen: Vec<PointCloud> = load_dataset(gen_dir)?.into_iter().map(|(_, c)| c).collect();
    let reference: Vec<PointCloud> = load_dataset(ref_dir)?.into_iter().map(|(_, c)| c).collect();
    one_nna_with(&gen, &reference, kind, &cfg.metric_options())
        .map_err(|e| CliError::new(e.to_string()))
}

/// `preprocess`: resamples every part to the batch mean count for its part id
/// (rounded to nearest). Shapes missing a part that others have are skipped
/// with a warning.
pub fn preprocess_dir(in_dir: &Path, out_dir: &Path, cfg: &RunConfig) -> Result<usize, CliError> {
    let shapes = load_dataset(in_dir)?;
    let targets = part_mean_targets(&shapes);
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::new(e.to_string()))?;
    let header = Meta::new("preprocess", cfg).xyz_header();
    let mut written = 0;
    for (id, cloud) in &shapes {
        match preprocess_shape(id, cloud, &targets, cfg) {
            Some(out_cloud) => {
                write_xyz_with_header(&out_dir.join(format!("{id}.xyz")), &out_cloud, Some(&header))?;
                written += 1;
            }
            None => eprintln!("warning: {id}: missing part, skipped"),
        }
    }
    Ok(written)
}

/// Mean point count per part id over the shapes that have the part.
pub fn part_mean_targets(shapes: &[(String, PointCloud)]) -> Vec<usize> {
    let max_parts = shapes.iter().map(|(_, c)| c.part_count()).max().unwrap_or(0);
    (0..max_parts)
        .map(|part| {
            let counts: Vec<usize> = shapes
                .iter()
                .map(|(_, c)| c.part(part).0.len())
                .filter(|&n| n > 0)
                .collect();
            if counts.is_empty() {
                0
            } else {
                let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
                mean.round() as usize
            }
        })
        .collect()
}

fn preprocess_shape(
    id: &str,
    cloud: &PointCloud,
    targets: &[usize],
    cfg: &RunConfig,
) -> Option<PointCloud> {
    let mut points = Vec::new();
    let mut labels = Vec::new();
    for (part, &target) in targets.iter().enumerate() {
        if target == 0 {
            continue;
        }
        let (_, pts) = cloud.part(part);
        if pts.is_empty() {
            return None; // missing-part policy: skip and warn
        }
        let part_cloud = PointCloud::from_points(pts).ok()?;
        let mut rng = StdRng::seed_from_u64(derive_seed(cfg.seed, id, part));
        let resampled = resample_part(&part_cloud, target, &mut rng).ok()?;
        for p in resampled.points() {
            points.push(*p);
            labels.push(part);
        }
    }
    PointCloud::new(points, Some(labels)).ok()
}
