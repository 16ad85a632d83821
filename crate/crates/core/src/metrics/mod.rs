//! Shape distances (Chamfer, Earth Mover's), the symmetry discrepancy index,
//! and 1-NNA generative evaluation.

mod assignment;
mod kdtree;

use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::SeedableRng;
use rayon::prelude::*;

use crate::geom::{normalize_cloud, resample_part, PointCloud, ReflectionPlane};
use crate::symgroup::{
    apply_group, fundamental_domain_unchecked, generate_group, GeneratorSet, DEFAULT_MAX_ORDER,
};
use crate::{Error, Result};

use assignment::{solve_auction, solve_exact, CostMatrix};
use kdtree::{dist2, KdTree};

/// Reported SDI-CD is the raw distance scaled by 10.
pub const SDI_CD_SCALE: f64 = 10.0;
/// Reported SDI-EMD is the raw distance scaled by 10^3.
pub const SDI_EMD_SCALE: f64 = 1e3;
/// Largest instance the exact assignment solver accepts.
pub const EMD_EXACT_CAP: usize = 1024;
/// Duplicate shapes (distance ~0) make the 1-NN class ambiguous; they credit 1/2.
const NNA_DUPLICATE_EPS: f64 = 1e-15;
/// Seed for the deterministic reconstruction resample in SDI-EMD.
const SDI_RESAMPLE_SEED: u64 = 0x5d1_5eed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    ChamferDistance,
    EarthMovers,
}

impl MetricKind {
    pub fn scale_factor(&self) -> f64 {
        match self {
            MetricKind::ChamferDistance => SDI_CD_SCALE,
            MetricKind::EarthMovers => SDI_EMD_SCALE,
        }
    }
}

/// One SDI evaluation: raw value plus the reporting scale applied to it.
/// `normalized` records that the shape was rescaled to unit max radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub kind: MetricKind,
    pub raw: f64,
    pub scaled: f64,
    pub scale_factor: f64,
    pub normalized: bool,
}

impl EvalReport {
    fn new(kind: MetricKind, raw: f64) -> Self {
        let factor = kind.scale_factor();
        Self {
            kind,
            raw,
            scaled: raw * factor,
            scale_factor: factor,
            normalized: true,
        }
    }
}

fn coords(c: &PointCloud) -> Vec<[f64; 3]> {
    c.points().iter().map(|p| [p.x, p.y, p.z]).collect()
}

/// Symmetric Chamfer distance: mean squared nearest-neighbor distance from
/// `a` to `b` plus the reverse term. Tree-accelerated, identical to brute force.
pub fn chamfer(a: &PointCloud, b: &PointCloud) -> f64 {
    let pa = coords(a);
    let pb = coords(b);
    directed_mean_sq(&pa, &pb) + directed_mean_sq(&pb, &pa)
}

fn directed_mean_sq(from: &[[f64; 3]], to: &[[f64; 3]]) -> f64 {
    let sum: f64 = if to.len() >= 48 {
        let tree = KdTree::build(to);
        from.iter().map(|q| tree.nearest_dist2(q)).sum()
    } else {
        from.iter()
            .map(|q| to.iter().map(|p| dist2(q, p)).fold(f64::INFINITY, f64::min))
            .sum()
    };
    sum / from.len() as f64
}

/// Earth Mover's Distance: minimum over bijections of the mean point-pair
/// Euclidean distance, solved exactly as a linear assignment problem.
/// Instances above [`EMD_EXACT_CAP`] are rejected; use [`emd_approx`].
pub fn emd(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    emd_with_cap(a, b, EMD_EXACT_CAP)
}

pub fn emd_with_cap(a: &PointCloud, b: &PointCloud, cap: usize) -> Result<f64> {
    let cost = emd_cost(a, b)?;
    if cost.n > cap {
        return Err(Error::AboveSolverCap { n: cost.n, cap });
    }
    let (_, total) = solve_exact(&cost);
    Ok(total / cost.n as f64)
}

/// Approximate EMD via epsilon-scaling auction; intended for instances above
/// the exact cap. Cost error is bounded by the final epsilon per point.
pub fn emd_approx(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    let cost = emd_cost(a, b)?;
    let n = cost.n as f64;
    let (_, total) = solve_auction(&cost, 1e-6 / n);
    Ok(total / n)
}

fn emd_cost(a: &PointCloud, b: &PointCloud) -> Result<CostMatrix> {
    if a.len() != b.len() {
        return Err(Error::UnequalSizes { a: a.len(), b: b.len() });
    }
    let pa = coords(a);
    let pb = coords(b);
    let n = pa.len();
    let mut c = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            c[i * n + j] = dist2(&pa[i], &pb[j]).sqrt();
        }
    }
    Ok(CostMatrix { n, c })
}

/// Distance between two clouds under the chosen metric.
pub fn cloud_distance(kind: MetricKind, a: &PointCloud, b: &PointCloud) -> Result<f64> {
    match kind {
        MetricKind::ChamferDistance => Ok(chamfer(a, b)),
        MetricKind::EarthMovers => emd(a, b),
    }
}

/// Solver knobs for the EMD-backed paths.
#[derive(Debug, Clone, Copy)]
pub struct MetricOptions {
    pub emd_cap: usize,
    pub emd_approx: bool,
    /// Seed for the deterministic reconstruction resample in SDI-EMD.
    pub resample_seed: u64,
}

impl Default for MetricOptions {
    fn default() -> Self {
        Self {
            emd_cap: EMD_EXACT_CAP,
            emd_approx: false,
            resample_seed: SDI_RESAMPLE_SEED,
        }
    }
}

impl MetricOptions {
    fn emd(&self, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        if self.emd_approx && a.len() > self.emd_cap {
            emd_approx(a, b)
        } else {
            emd_with_cap(a, b, self.emd_cap)
        }
    }

    fn distance(&self, kind: MetricKind, a: &PointCloud, b: &PointCloud) -> Result<f64> {
        match kind {
            MetricKind::ChamferDistance => Ok(chamfer(a, b)),
            MetricKind::EarthMovers => self.emd(a, b),
        }
    }
}

/// Symmetry discrepancy index: distance between the normalized shape and its
/// reconstruction from the fundamental domain under the group generated by
/// `gens` (given in the input cloud's frame).
pub fn sdi(c: &PointCloud, gens: &GeneratorSet, kind: MetricKind) -> Result<EvalReport> {
    sdi_with(c, gens, kind, &MetricOptions::default())
}

pub fn sdi_with(
    c: &PointCloud,
    gens: &GeneratorSet,
    kind: MetricKind,
    opts: &MetricOptions,
) -> Result<EvalReport> {
    let (normalized, frame) = normalize_cloud(c)?;
    let gens_norm = gens.map_planes(|p| frame.plane_to_normalized(p))?;
    sdi_on_normalized(&normalized, &gens_norm, kind, opts)
}

/// SDI against the vertical bisector mirror `n = (1,0,0), d = 0`, applied
/// after normalization; the convention for symmetry-oblivious baselines.
pub fn sdi_default(c: &PointCloud, kind: MetricKind) -> Result<EvalReport> {
    sdi_default_with(c, kind, &MetricOptions::default())
}

pub fn sdi_default_with(
    c: &PointCloud,
    kind: MetricKind,
    opts: &MetricOptions,
) -> Result<EvalReport> {
    let (normalized, _) = normalize_cloud(c)?;
    let mirror = ReflectionPlane::new(Vector3::new(1.0, 0.0, 0.0), 0.0)?;
    let gens = GeneratorSet::new(vec![mirror])?;
    sdi_on_normalized(&normalized, &gens, kind, opts)
}

fn sdi_on_normalized(
    c: &PointCloud,
    gens: &GeneratorSet,
    kind: MetricKind,
    opts: &MetricOptions,
) -> Result<EvalReport> {
    let group = generate_group(gens, DEFAULT_MAX_ORDER)?;
    let (domain, _) = fundamental_domain_unchecked(&group, c)?;
    let seed = PointCloud::new(
        domain.indices().iter().map(|&i| c.points()[i]).collect(),
        None,
    )?;
    let recon = apply_group(&group, &seed, true);
    let raw = match kind {
        MetricKind::ChamferDistance => chamfer(c, &recon),
        MetricKind::EarthMovers => {
            let mut rng = StdRng::seed_from_u64(opts.resample_seed);
            let matched = resample_part(&recon, c.len(), &mut rng)?;
            opts.emd(c, &matched)?
        }
    };
    Ok(EvalReport::new(kind, raw))
}

/// Leave-one-out 1-nearest-neighbor classification accuracy (percent) over
/// the pooled generated and reference sets. 50% means indistinguishable.
pub fn one_nna(gen: &[PointCloud], reference: &[PointCloud], kind: MetricKind) -> Result<f64> {
    one_nna_with(gen, reference, kind, &MetricOptions::default())
}

pub fn one_nna_with(
    gen: &[PointCloud],
    reference: &[PointCloud],
    kind: MetricKind,
    opts: &MetricOptions,
) -> Result<f64> {
    if gen.is_empty() || reference.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let pool: Vec<&PointCloud> = gen.iter().chain(reference.iter()).collect();
    let n = pool.len();
    let is_gen = |i: usize| i < gen.len();

    // Upper-triangle distance matrix, parallel over pairs.
    let pairs: Vec<(usize, usize)> = (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect();
    let dists: Result<Vec<f64>> = pairs
        .par_iter()
        .map(|&(i, j)| opts.distance(kind, pool[i], pool[j]))
        .collect();
    let dists = dists?;
    let mut matrix = vec![0.0f64; n * n];
    for (&(i, j), &d) in pairs.iter().zip(dists.iter()) {
        matrix[i * n + j] = d;
        matrix[j * n + i] = d;
    }

    let mut credit = 0.0f64;
    for i in 0..n {
        let mut best = f64::INFINITY;
        let mut best_j = usize::MAX;
        for j in 0..n {
            if j != i && matrix[i * n + j] < best {
                best = matrix[i * n + j];
                best_j = j;
            }
        }
        if best <= NNA_DUPLICATE_EPS {
            credit += 0.5;
        } else if is_gen(i) == is_gen(best_j) {
            credit += 1.0;
        }
    }
    Ok(100.0 * credit / n as f64)
}
