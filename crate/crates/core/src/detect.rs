//! Symmetry discovery: pair voting, kernel density over the reflection metric
//! space, mean-shift mode seeking, and candidate group selection.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::geom::{PointCloud, ReflectionPlane};
use crate::symgroup::{snap_generators, validate_symmetry_with, GeneratorSet};
use crate::{Error, Result};

/// Default Gaussian kernel bandwidth on unit-radius clouds.
pub const DEFAULT_BANDWIDTH: f64 = 0.15;
/// Converged mean-shift points within this distance merge into one mode.
pub const MODE_MERGE_RADIUS: f64 = 0.05;
/// Number of top modes fed into generator-subset enumeration.
pub const DEFAULT_TOP_K: usize = 6;
/// Mean-shift iteration cap.
pub const DEFAULT_MAX_ITER: usize = 200;
/// Mean-shift convergence threshold on the step length.
pub const DEFAULT_MS_TOL: f64 = 1e-8;
/// Point pairs closer than this cast no vote.
const PAIR_EPS: f64 = 1e-9;
/// Votes drawn per deterministic RNG chunk, independent of thread count.
const VOTE_CHUNK: usize = 8192;

/// Candidate reflections embedded as canonical `(normal, offset)` 4-vectors.
#[derive(Debug, Clone, Default)]
pub struct ReflectionDb {
    entries: Vec<[f64; 4]>,
}

impl ReflectionDb {
    pub fn new(planes: &[ReflectionPlane]) -> Self {
        Self {
            entries: planes.iter().map(|p| p.embed()).collect(),
        }
    }

    pub fn entries(&self) -> &[[f64; 4]] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Kernel bandwidth and neighborhood radius (`None` = infinite).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityParams {
    pub bandwidth: f64,
    pub radius: Option<f64>,
}

impl Default for DensityParams {
    fn default() -> Self {
        Self {
            bandwidth: DEFAULT_BANDWIDTH,
            radius: None,
        }
    }
}

#[inline]
fn dist2_4(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    let mut acc = 0.0;
    for k in 0..4 {
        let d = a[k] - b[k];
        acc += d * d;
    }
    acc
}

/// Distance in the reflection metric space: Euclidean distance between the
/// canonical `(normal, offset)` embeddings.
pub fn reflection_distance(a: &ReflectionPlane, b: &ReflectionPlane) -> f64 {
    dist2_4(&a.embed(), &b.embed()).sqrt()
}

/// Casts up to `budget` votes from uniformly sampled unordered point pairs:
/// each pair votes for the plane through its midpoint with normal along the
/// pair difference. Near-coincident pairs are skipped.
pub fn vote_pairs<R: Rng>(c: &PointCloud, budget: usize, rng: &mut R) -> ReflectionDb {
    let root: u64 = rng.gen();
    let chunks = budget.div_ceil(VOTE_CHUNK);
    let entries: Vec<[f64; 4]> = (0..chunks)
        .into_par_iter()
        .flat_map_iter(|chunk| {
            let mut rng =
                StdRng::seed_from_u64(root.wrapping_add(0x9e37_79b9_7f4a_7c15u64.wrapping_mul(chunk as u64 + 1)));
            let count = VOTE_CHUNK.min(budget - chunk * VOTE_CHUNK);
            let mut out = Vec::with_capacity(count);
            let n = c.len();
            for _ in 0..count {
                let i = rng.gen_range(0..n);
                let j = rng.gen_range(0..n);
                if i == j {
                    continue;
                }
                let a = c.points()[i];
                let b = c.points()[j];
                let diff = a - b;
                let len = diff.norm();
                if len < PAIR_EPS {
                    continue;
                }
                let mid = nalgebra::center(&a, &b);
                let normal = diff / len;
                if let Ok(plane) = ReflectionPlane::new(normal, normal.dot(&mid.coords)) {
                    out.push(plane.embed());
                }
            }
            out
        })
        .collect();
    ReflectionDb { entries }
}

/// Kernel density `sum_R K((s - R) / h)` with the Gaussian kernel
/// `K(u) = exp(-|u|^2 / 2)`, restricted to the neighborhood radius.
pub fn density(s: &[f64; 4], db: &ReflectionDb, params: &DensityParams) -> f64 {
    debug_assert!(params.bandwidth > 0.0, "bandwidth must be positive");
    let h2 = params.bandwidth * params.bandwidth;
    let r2 = params.radius.map(|r| r * r);
    db.entries
        .iter()
        .map(|e| {
            let d2 = dist2_4(s, e);
            match r2 {
                Some(r2) if d2 > r2 => 0.0,
                _ => (-d2 / (2.0 * h2)).exp(),
            }
        })
        .sum()
}

/// One kernel-weighted-mean update; `None` when no neighbor carries weight.
fn mean_shift_step(s: &[f64; 4], db: &ReflectionDb, params: &DensityParams) -> Option<[f64; 4]> {
    debug_assert!(params.bandwidth > 0.0, "bandwidth must be positive");
    let h2 = params.bandwidth * params.bandwidth;
    let r2 = params.radius.map(|r| r * r);
    let mut wsum = 0.0;
    let mut acc = [0.0f64; 4];
    for e in &db.entries {
        let d2 = dist2_4(s, e);
        if let Some(r2) = r2 {
            if d2 > r2 {
                continue;
            }
        }
        let w = (-d2 / (2.0 * h2)).exp();
        wsum += w;
        for k in 0..4 {
            acc[k] += w * e[k];
        }
    }
    if wsum <= 0.0 || !wsum.is_finite() {
        return None;
    }
    for a in acc.iter_mut() {
        *a /= wsum;
    }
    Some(acc)
}

/// Iterates the kernel-weighted mean from `s0` until the step length drops
/// below `tol` or `max_iter` is reached.
pub fn mean_shift(
    s0: &[f64; 4],
    db: &ReflectionDb,
    params: &DensityParams,
    max_iter: usize,
    tol: f64,
) -> [f64; 4] {
    let mut s = *s0;
    for _ in 0..max_iter {
        let Some(next) = mean_shift_step(&s, db, params) else {
            return s;
        };
        let step2 = dist2_4(&next, &s);
        s = next;
        if step2 <= tol * tol {
            break;
        }
    }
    s
}

/// A density mode with the fraction of database entries converging to it.
#[derive(Debug, Clone)]
pub struct Mode {
    pub plane: ReflectionPlane,
    pub mass: f64,
    pub embedding: [f64; 4],
}

/// Runs mean-shift from every database entry, merges converged points within
/// [`MODE_MERGE_RADIUS`], and returns modes sorted by mass descending.
pub fn cluster_modes(db: &ReflectionDb, params: &DensityParams) -> Vec<Mode> {
    cluster_modes_with(db, params, DEFAULT_MAX_ITER, DEFAULT_MS_TOL, MODE_MERGE_RADIUS)
}

pub fn cluster_modes_with(
    db: &ReflectionDb,
    params: &DensityParams,
    max_iter: usize,
    tol: f64,
    merge_radius: f64,
) -> Vec<Mode> {
    if db.is_empty() {
        return Vec::new();
    }
    // Phase one: full mean-shift from a seed prefix establishes the mode set.
    let phase_one = db.len().min(256);
    let converged: Vec<[f64; 4]> = db.entries[..phase_one]
        .par_iter()
        .map(|e| mean_shift(e, db, params, max_iter, tol))
        .collect();

    // Merge in entry order: running mean per mode keeps positions stable.
    let mut centers: Vec<[f64; 4]> = Vec::new();
    let mut counts: Vec<usize> = Vec::new();
    let merge = |centers: &mut Vec<[f64; 4]>, counts: &mut Vec<usize>, point: &[f64; 4]| {
        for (center, count) in centers.iter_mut().zip(counts.iter_mut()) {
            if dist2_4(center, point).sqrt() <= merge_radius {
                let n = *count as f64;
                for k in 0..4 {
                    center[k] = (center[k] * n + point[k]) / (n + 1.0);
                }
                *count += 1;
                return;
            }
        }
        centers.push(*point);
        counts.push(1);
    };
    for point in &converged {
        merge(&mut centers, &mut counts, point);
    }

    // Phase two: remaining seeds stop early once their trajectory enters the
    // capture radius of an established mode; stragglers converge fully and
    // found new modes.
    enum Fate {
        Snapped(usize),
        Converged([f64; 4]),
    }
    let snapshot = centers.clone();
    let snap_radius = merge_radius * 0.5;
    let near_center = |s: &[f64; 4]| -> Option<usize> {
        snapshot
            .iter()
            .position(|c| dist2_4(c, s).sqrt() <= snap_radius)
    };
    let fates: Vec<Fate> = db.entries[phase_one..]
        .par_iter()
        .map(|e| {
            let mut s = *e;
            for _ in 0..max_iter {
                if let Some(i) = near_center(&s) {
                    return Fate::Snapped(i);
                }
                let Some(next) = mean_shift_step(&s, db, params) else {
                    break;
                };
                let step2 = dist2_4(&next, &s);
                s = next;
                if step2 <= tol * tol {
                    break;
                }
            }
            match near_center(&s) {
                Some(i) => Fate::Snapped(i),
                None => Fate::Converged(s),
            }
        })
        .collect();
    for fate in &fates {
        match fate {
            Fate::Snapped(i) => counts[*i] += 1,
            Fate::Converged(point) => merge(&mut centers, &mut counts, point),
        }
    }

    let total = db.len() as f64;
    let mut modes: Vec<Mode> = centers
        .iter()
        .zip(counts.iter())
        .filter_map(|(center, &count)| {
            let n = nalgebra::Vector3::new(center[0], center[1], center[2]);
            let norm = n.norm();
            if norm < 1e-6 {
                return None;
            }
            let plane = ReflectionPlane::new(n / norm, center[3]).ok()?;
            Some(Mode {
                plane,
                mass: count as f64 / total,
                embedding: *center,
            })
        })
        .collect();
    modes.sort_by(|a, b| b.mass.total_cmp(&a.mass));
    modes
}

/// Knobs for [`detect_symmetry_group`]. Defaults assume normalized
/// (unit-max-radius) clouds.
#[derive(Debug, Clone)]
pub struct DetectConfig {
    pub seed: u64,
    /// Vote budget; `None` uses `min(50_000, n^2 / 2)`.
    pub vote_budget: Option<usize>,
    pub density: DensityParams,
    pub top_k: usize,
    pub ms_max_iter: usize,
    pub ms_tol: f64,
    pub mode_merge_radius: f64,
    /// Bandwidth of the sharpening mean-shift pass applied to the top modes
    /// before candidate validation; `None` uses a third of the bandwidth.
    pub refine_bandwidth: Option<f64>,
    pub coverage_tol: f64,
    pub max_order: usize,
}

impl Default for DetectConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            vote_budget: None,
            density: DensityParams::default(),
            top_k: DEFAULT_TOP_K,
            ms_max_iter: DEFAULT_MAX_ITER,
            ms_tol: DEFAULT_MS_TOL,
            mode_merge_radius: MODE_MERGE_RADIUS,
            refine_bandwidth: None,
            coverage_tol: crate::symgroup::DEFAULT_COVERAGE_TOL,
            max_order: crate::symgroup::DEFAULT_MAX_ORDER,
        }
    }
}

impl DetectConfig {
    pub fn effective_budget(&self, n: usize) -> usize {
        self.vote_budget.unwrap_or_else(|| (n * n / 2).min(50_000))
    }
}

/// Outcome of symmetry detection. `found` is false when no candidate passed
/// validation and the empty generator set was returned.
#[derive(Debug, Clone)]
pub struct Detection {
    pub generators: GeneratorSet,
    pub residual: f64,
    pub domain_size: usize,
    pub found: bool,
}

/// Polishes a candidate mirror against the cloud: reflect every point, match
/// it to its nearest neighbor, and re-estimate the plane from the matched
/// pairs with the same midpoint/normal rule the votes use. Pairs are trimmed
/// to a multiple of the median match distance for robustness.
pub fn refine_plane_on_cloud(
    plane: &ReflectionPlane,
    c: &PointCloud,
    iterations: usize,
) -> ReflectionPlane {
    let pts = c.points();
    let mut current = *plane;
    for _ in 0..iterations {
        // Match each reflected point to its nearest cloud point.
        let mut pairs: Vec<(usize, usize, f64)> = Vec::with_capacity(pts.len());
        for (i, p) in pts.iter().enumerate() {
            let r = crate::geom::reflect_point(&current, p);
            let mut best = f64::INFINITY;
            let mut best_j = usize::MAX;
            for (j, q) in pts.iter().enumerate() {
                let d2 = (r - q).norm_squared();
                if d2 < best {
                    best = d2;
                    best_j = j;
                }
            }
            pairs.push((i, best_j, best.sqrt()));
        }
        let mut dists: Vec<f64> = pairs.iter().map(|p| p.2).collect();
        dists.sort_by(f64::total_cmp);
        let median = dists[dists.len() / 2];
        let cutoff = (4.0 * median).max(1e-6);

        let mut scatter = nalgebra::Matrix3::<f64>::zeros();
        let mut offset_acc = 0.0;
        let mut weight = 0.0;
        let mut midpoints: Vec<nalgebra::Vector3<f64>> = Vec::new();
        for &(i, j, d) in &pairs {
            if i == j || d > cutoff {
                continue;
            }
            let diff = pts[i] - pts[j];
            if diff.norm() < 1e-12 {
                continue;
            }
            scatter += diff * diff.transpose();
            midpoints.push((pts[i].coords + pts[j].coords) / 2.0);
        }
        if midpoints.is_empty() {
            return current;
        }
        let eig = scatter.symmetric_eigen();
        let max_idx = (0..3)
            .max_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]))
            .unwrap();
        let n = eig.eigenvectors.column(max_idx).into_owned().normalize();
        for m in &midpoints {
            offset_acc += n.dot(m);
            weight += 1.0;
        }
        match ReflectionPlane::new(n, offset_acc / weight) {
            Ok(p) => {
                let moved = crate::symgroup::embedding_distance(&current, &p);
                current = p;
                if moved < 1e-7 {
                    break;
                }
            }
            Err(_) => return current,
        }
    }
    current
}

/// Searches generator subsets of size 0..=3 drawn from the top density modes,
/// snaps inter-plane angles, validates coverage, and returns the survivor with
/// the smallest fundamental domain (ties: lower residual, then fewer
/// generators).
pub fn detect_symmetry_group(c: &PointCloud, cfg: &DetectConfig) -> Result<Detection> {
    if c.len() < 8 {
        return Err(Error::InvalidConfig(
            "symmetry detection needs at least 8 points".into(),
        ));
    }
    let mut rng = StdRng::seed_from_u64(cfg.seed);
    let db = vote_pairs(c, cfg.effective_budget(c.len()), &mut rng);
    let modes = cluster_modes_with(
        &db,
        &cfg.density,
        cfg.ms_max_iter,
        cfg.ms_tol,
        cfg.mode_merge_radius,
    );
    // Sharpen the coarse mode positions with a narrow-bandwidth pass; the wide
    // kernel that finds the modes also smears them toward background votes.
    let refine = DensityParams {
        bandwidth: cfg
            .refine_bandwidth
            .unwrap_or(cfg.density.bandwidth / 3.0),
        radius: cfg.density.radius,
    };
    let top: Vec<Mode> = modes
        .iter()
        .take(cfg.top_k)
        .filter_map(|m| {
            let s = mean_shift(&m.embedding, &db, &refine, cfg.ms_max_iter, cfg.ms_tol);
            let n = nalgebra::Vector3::new(s[0], s[1], s[2]);
            let norm = n.norm();
            if norm < 1e-6 {
                return None;
            }
            let plane = ReflectionPlane::new(n / norm, s[3]).ok()?;
            let plane = refine_plane_on_cloud(&plane, c, 40);
            Some(Mode {
                plane,
                mass: m.mass,
                embedding: plane.embed(),
            })
        })
        .collect();

    let mut subsets: Vec<Vec<usize>> = Vec::new();
    for i in 0..top.len() {
        subsets.push(vec![i]);
        for j in i + 1..top.len() {
            subsets.push(vec![i, j]);
            for k in j + 1..top.len() {
                subsets.push(vec![i, j, k]);
            }
        }
    }

    let candidates: Vec<(GeneratorSet, f64, usize)> = subsets
        .par_iter()
        .filter_map(|subset| {
            let planes: Vec<ReflectionPlane> = subset.iter().map(|&i| top[i].plane).collect();
            let gens = GeneratorSet::new(planes).ok()?;
            let snapped = snap_generators(&gens).ok()?;
            let (residual, ok, domain) =
                validate_symmetry_with(c, &snapped, cfg.coverage_tol, cfg.max_order).ok()?;
            ok.then_some((snapped, residual, domain))
        })
        .collect();

    let best = candidates.into_iter().min_by(|a, b| {
        (a.2, a.1, a.0.active_count())
            .partial_cmp(&(b.2, b.1, b.0.active_count()))
            .unwrap()
    });

    Ok(match best {
        Some((generators, residual, domain_size)) => Detection {
            generators,
            residual,
            domain_size,
            found: true,
        },
        None => Detection {
            generators: GeneratorSet::empty(),
            residual: 0.0,
            domain_size: c.len(),
            found: false,
        },
    })
}
