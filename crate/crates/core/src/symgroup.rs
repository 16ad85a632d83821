//! Finite symmetry-group generation from reflection generators, group
//! application, and fundamental-domain extraction.

use nalgebra::{Matrix3, Vector3};

use crate::geom::{
    compose, reflection_to_transform, PointCloud, ReflectionPlane, RigidTransform,
};
use crate::metrics::chamfer;
use crate::{Error, Result};

/// Group elements closer than this in flattened-matrix norm are identified.
pub const ELEMENT_DEDUP_TOL: f64 = 1e-6;
/// Default cap on group order; closure beyond it reports a non-terminating group.
pub const DEFAULT_MAX_ORDER: usize = 128;
/// Boundary tie-break: points within this of a mirror belong to the domain.
pub const BOUNDARY_EPS: f64 = 1e-6;
/// Default coverage tolerance for accepting a symmetry on normalized clouds.
pub const DEFAULT_COVERAGE_TOL: f64 = 0.02;
/// Merge radius for deduplicating points in group images.
pub const MERGE_RADIUS: f64 = 1e-6;
/// Dihedral angles snap to pi/k within this tolerance (1.5 degrees).
pub const SNAP_TOL: f64 = 1.5 * std::f64::consts::PI / 180.0;
/// Largest rotation order produced by snapping (smallest angle pi/36).
pub const MAX_ROTATION_ORDER: usize = 36;

/// Up to three reflection generators; inactive slots are the zero sentinel.
///
/// Invariants: active slots precede inactive ones and active planes are
/// pairwise non-identical.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorSet {
    slots: [Option<ReflectionPlane>; 3],
}

impl GeneratorSet {
    /// The empty (identity-group) generator set.
    pub fn empty() -> Self {
        Self { slots: [None; 3] }
    }

    pub fn new(planes: Vec<ReflectionPlane>) -> Result<Self> {
        if planes.len() > 3 {
            return Err(Error::TooManyGenerators);
        }
        for i in 0..planes.len() {
            for j in i + 1..planes.len() {
                if embedding_distance(&planes[i], &planes[j]) < 1e-9 {
                    return Err(Error::DuplicateGenerator);
                }
            }
        }
        let mut slots = [None; 3];
        for (slot, plane) in slots.iter_mut().zip(planes) {
            *slot = Some(plane);
        }
        Ok(Self { slots })
    }

    pub fn slots(&self) -> &[Option<ReflectionPlane>; 3] {
        &self.slots
    }

    pub fn active(&self) -> Vec<ReflectionPlane> {
        self.slots.iter().flatten().copied().collect()
    }

    pub fn active_count(&self) -> usize {
        self.slots.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.active_count() == 0
    }

    /// Applies `f` to every active plane, revalidating the set.
    pub fn map_planes<F>(&self, f: F) -> Result<Self>
    where
        F: Fn(&ReflectionPlane) -> ReflectionPlane,
    {
        Self::new(self.active().iter().map(&f).collect())
    }

    /// Serialized 12-slot form: three `(normal, offset)` blocks, zeros padding
    /// inactive slots.
    pub fn to_flat(&self) -> [f64; 12] {
        let mut out = [0.0; 12];
        for (i, slot) in self.slots.iter().enumerate() {
            if let Some(p) = slot {
                out[4 * i..4 * i + 4].copy_from_slice(&p.embed());
            }
        }
        out
    }

    /// Strict decode of [`to_flat`](Self::to_flat): slots must hold either a
    /// unit normal or the zero sentinel.
    pub fn from_flat(v: &[f64; 12]) -> Result<Self> {
        let mut planes = Vec::new();
        for i in 0..3 {
            let n = Vector3::new(v[4 * i], v[4 * i + 1], v[4 * i + 2]);
            let norm = n.norm();
            if norm < 1e-9 {
                continue;
            }
            if (norm - 1.0).abs() > 1e-6 {
                return Err(Error::NonUnitNormal { norm });
            }
            planes.push(ReflectionPlane::new(n / norm, v[4 * i + 3])?);
        }
        Self::new(planes)
    }
}

pub(crate) fn embedding_distance(a: &ReflectionPlane, b: &ReflectionPlane) -> f64 {
    let ea = a.embed();
    let eb = b.embed();
    ea.iter()
        .zip(eb.iter())
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// The finite group generated by a reflection set, with deduplicated elements.
#[derive(Debug, Clone)]
pub struct SymmetryGroup {
    elements: Vec<RigidTransform>,
    generators: GeneratorSet,
}

impl SymmetryGroup {
    pub fn elements(&self) -> &[RigidTransform] {
        &self.elements
    }

    pub fn generators(&self) -> &GeneratorSet {
        &self.generators
    }

    pub fn order(&self) -> usize {
        self.elements.len()
    }

    /// Planes of all plane-reflection elements in the group (the mirror
    /// arrangement). Always contains the generators.
    pub fn mirrors(&self) -> Vec<ReflectionPlane> {
        let mut out: Vec<ReflectionPlane> = Vec::new();
        for e in &self.elements {
            // Plane reflections have det -1 and trace +1.
            if e.det() > 0.0 || (e.linear().trace() - 1.0).abs() > 1e-6 {
                continue;
            }
            let nn = (Matrix3::identity() - e.linear()) / 2.0; // = n n^T
            let col = (0..3)
                .map(|j| nn.column(j).into_owned())
                .max_by(|a, b| a.norm().total_cmp(&b.norm()))
                .unwrap();
            let n = col / col.norm();
            let d = n.dot(&e.translation()) / 2.0;
            if let Ok(plane) = ReflectionPlane::new(n, d) {
                if out.iter().all(|m| embedding_distance(m, &plane) > 1e-9) {
                    out.push(plane);
                }
            }
        }
        out
    }
}

/// Breadth-first closure of the generators under composition, deduplicating
/// elements within [`ELEMENT_DEDUP_TOL`]. Fails rather than truncating when
/// the closure exceeds `max_order`.
pub fn generate_group(gens: &GeneratorSet, max_order: usize) -> Result<SymmetryGroup> {
    let max_order = max_order.max(1);
    let generators: Vec<RigidTransform> = gens
        .active()
        .iter()
        .map(reflection_to_transform)
        .collect();
    let mut elements = vec![RigidTransform::identity()];
    let mut frontier = vec![RigidTransform::identity()];
    while !frontier.is_empty() {
        let mut next = Vec::new();
        for e in &frontier {
            for g in &generators {
                let cand = compose(e, g).orthonormalized();
                if elements
                    .iter()
                    .all(|x| x.distance(&cand) >= ELEMENT_DEDUP_TOL)
                {
                    if elements.len() >= max_order {
                        return Err(Error::NonTerminatingGroup { max_order });
                    }
                    elements.push(cand.clone());
                    next.push(cand);
                }
            }
        }
        frontier = next;
    }
    Ok(SymmetryGroup {
        elements,
        generators: gens.clone(),
    })
}

/// Union of all group images of `d`, in element-major order. With `dedup`,
/// points within [`MERGE_RADIUS`] collapse to their first occurrence.
pub fn apply_group(g: &SymmetryGroup, d: &PointCloud, dedup: bool) -> PointCloud {
    let mut points = Vec::with_capacity(d.len() * g.order());
    let mut labels = d.labels().map(|_| Vec::with_capacity(d.len() * g.order()));
    for e in g.elements() {
        for (i, p) in d.points().iter().enumerate() {
            points.push(e.apply(p));
            if let (Some(out), Some(l)) = (labels.as_mut(), d.labels()) {
                out.push(l[i]);
            }
        }
    }
    if dedup {
        let keep = dedup_mask(&points, MERGE_RADIUS);
        points = points
            .iter()
            .zip(keep.iter())
            .filter(|(_, &k)| k)
            .map(|(p, _)| *p)
            .collect();
        labels = labels.map(|l| {
            l.iter()
                .zip(keep.iter())
                .filter(|(_, &k)| k)
                .map(|(x, _)| *x)
                .collect()
        });
    }
    PointCloud::new(points, labels).expect("group image of a non-empty cloud is non-empty")
}

// Sweep over x with a window of width `radius`; exact for the tiny merge radii
// used here.
fn dedup_mask(points: &[nalgebra::Point3<f64>], radius: f64) -> Vec<bool> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].x.total_cmp(&points[b].x));
    let mut keep = vec![true; points.len()];
    for (rank, &i) in order.iter().enumerate() {
        if !keep[i] {
            continue;
        }
        for &j in order[rank + 1..].iter() {
            if points[j].x - points[i].x > radius {
                break;
            }
            if keep[j] && (points[j] - points[i]).norm() <= radius {
                keep[j] = false;
            }
        }
    }
    keep
}

/// Point-index subset of a cloud from which the group regenerates it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FundamentalDomain {
    indices: Vec<usize>,
}

impl FundamentalDomain {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn to_cloud(&self, c: &PointCloud) -> Result<PointCloud> {
        PointCloud::new(
            self.indices.iter().map(|&i| c.points()[i]).collect(),
            c.labels()
                .map(|l| self.indices.iter().map(|&i| l[i]).collect()),
        )
    }
}

// Directions tried when orienting the fundamental region; the first one not
// grazing any mirror wins, so axis-aligned mirrors get axis-aligned regions.
const CHAMBER_DIRECTIONS: [[f64; 3]; 6] = [
    [1.0, 0.0, 0.0],
    [0.0, 1.0, 0.0],
    [0.0, 0.0, 1.0],
    [0.8402894745, 0.5194128590, 0.1556271294],
    [0.2672612419, 0.5345224838, 0.8017837257],
    [0.6396021491, -0.4264014327, 0.6396021491],
];

fn chamber_signs(mirrors: &[ReflectionPlane]) -> Result<Vec<f64>> {
    for dir in CHAMBER_DIRECTIONS {
        let u = Vector3::new(dir[0], dir[1], dir[2]);
        if mirrors.iter().all(|m| m.normal().dot(&u).abs() > 1e-6) {
            return Ok(mirrors
                .iter()
                .map(|m| m.normal().dot(&u).signum())
                .collect());
        }
    }
    // Deterministic fallback sweep.
    for k in 1..64u32 {
        let t = f64::from(k);
        let u = Vector3::new((1.3 * t).sin(), (2.1 * t).cos(), (0.7 * t).sin()).normalize();
        if mirrors.iter().all(|m| m.normal().dot(&u).abs() > 1e-6) {
            return Ok(mirrors
                .iter()
                .map(|m| m.normal().dot(&u).signum())
                .collect());
        }
    }
    Err(Error::InvalidConfig(
        "could not orient a fundamental region for the mirror arrangement".into(),
    ))
}

/// Region-based domain extraction without the coverage gate: selects the
/// points inside one oriented region of the group's mirror arrangement (for a
/// single reflection, the half-space `n.x >= d - eps`; implied rotations
/// restrict to the corresponding wedge) and reports the reconstruction
/// residual `chamfer(c, apply_group(g, d))`.
pub fn fundamental_domain_unchecked(
    group: &SymmetryGroup,
    c: &PointCloud,
) -> Result<(FundamentalDomain, f64)> {
    let mirrors = group.mirrors();
    let signs = chamber_signs(&mirrors)?;
    let indices: Vec<usize> = (0..c.len())
        .filter(|&i| {
            let p = &c.points()[i];
            mirrors
                .iter()
                .zip(signs.iter())
                .all(|(m, s)| s * m.signed_distance(p) >= -BOUNDARY_EPS)
        })
        .collect();
    if indices.is_empty() {
        return Err(Error::NotASymmetry {
            residual: f64::INFINITY,
            tolerance: DEFAULT_COVERAGE_TOL,
        });
    }
    let domain = FundamentalDomain { indices };
    let seed = domain.to_cloud(c)?;
    let recon = apply_group(group, &seed, false);
    let residual = chamfer(c, &recon);
    Ok((domain, residual))
}

/// Domain extraction with the coverage guarantee: errors unless the group
/// regenerates the cloud within `coverage_tol`.
pub fn extract_fundamental_domain_with(
    gens: &GeneratorSet,
    c: &PointCloud,
    coverage_tol: f64,
    max_order: usize,
) -> Result<FundamentalDomain> {
    let group = generate_group(gens, max_order)?;
    let (domain, residual) = fundamental_domain_unchecked(&group, c)?;
    if residual > coverage_tol {
        return Err(Error::NotASymmetry {
            residual,
            tolerance: coverage_tol,
        });
    }
    Ok(domain)
}

pub fn extract_fundamental_domain(
    gens: &GeneratorSet,
    c: &PointCloud,
) -> Result<FundamentalDomain> {
    extract_fundamental_domain_with(gens, c, DEFAULT_COVERAGE_TOL, DEFAULT_MAX_ORDER)
}

/// Reconstruction residual of `c` under the group generated by `gens`, and
/// whether it passes `tol`.
pub fn validate_symmetry(c: &PointCloud, gens: &GeneratorSet, tol: f64) -> Result<(f64, bool)> {
    validate_symmetry_with(c, gens, tol, DEFAULT_MAX_ORDER).map(|(r, ok, _)| (r, ok))
}

/// As [`validate_symmetry`], additionally reporting the domain cardinality.
pub fn validate_symmetry_with(
    c: &PointCloud,
    gens: &GeneratorSet,
    tol: f64,
    max_order: usize,
) -> Result<(f64, bool, usize)> {
    let group = generate_group(gens, max_order)?;
    let (domain, residual) = fundamental_domain_unchecked(&group, c)?;
    Ok((residual, residual <= tol, domain.len()))
}

/// Snaps the dihedral angle of plane pairs to the nearest `pi/k`,
/// `k in 2..=36`, by rotating the later plane about the pair's intersection
/// line. Angles further than [`SNAP_TOL`] from every target are rejected.
///
/// With three active planes the pairs (0,1) and (0,2) are snapped; closure of
/// the generated group decides whether the triple is admissible.
pub fn snap_generators(gens: &GeneratorSet) -> Result<GeneratorSet> {
    let planes = gens.active();
    match planes.len() {
        0 | 1 => Ok(gens.clone()),
        2 => {
            let snapped = snap_pair(&planes[0], &planes[1])?;
            GeneratorSet::new(vec![planes[0], snapped])
        }
        _ => {
            let p1 = snap_pair(&planes[0], &planes[1])?;
            let p2 = snap_pair(&planes[0], &planes[2])?;
            GeneratorSet::new(vec![planes[0], p1, p2])
        }
    }
}

/// Snap targets pi/k for k in 2..=36 (rotation orders 2..=36 after doubling).
fn snap_target(theta: f64) -> Option<f64> {
    let mut best = None;
    let mut best_err = SNAP_TOL;
    for k in 2..=MAX_ROTATION_ORDER {
        let target = std::f64::consts::PI / k as f64;
        let err = (theta - target).abs();
        if err <= best_err {
            best_err = err;
            best = Some(target);
        }
    }
    best
}

fn snap_pair(a: &ReflectionPlane, b: &ReflectionPlane) -> Result<ReflectionPlane> {
    let na = a.normal();
    let nb = b.normal();
    let cos_psi = na.dot(&nb).clamp(-1.0, 1.0);
    let theta = cos_psi.abs().acos(); // dihedral angle in [0, pi/2]
    if theta < 1e-9 {
        // Parallel planes: nothing to snap; closure reports the translation.
        return Ok(*b);
    }
    let target = snap_target(theta).ok_or(Error::UnsnappableAngle {
        angle_deg: theta.to_degrees(),
        tol_deg: SNAP_TOL.to_degrees(),
    })?;
    if (theta - target).abs() < 1e-12 {
        return Ok(*b);
    }
    // In-plane unit vector orthogonal to na, pointing toward nb.
    let m = (nb - cos_psi * na).normalize();
    let psi_star = if cos_psi >= 0.0 {
        target
    } else {
        std::f64::consts::PI - target
    };
    let nb_new = (psi_star.cos() * na + psi_star.sin() * m).normalize();
    // Keep the intersection line fixed: take the point on it closest to origin.
    let denom = 1.0 - cos_psi * cos_psi;
    let alpha = (a.offset() - cos_psi * b.offset()) / denom;
    let beta = (b.offset() - cos_psi * a.offset()) / denom;
    let q = alpha * na + beta * nb;
    ReflectionPlane::new(nb_new, nb_new.dot(&q))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn plane(n: [f64; 3], d: f64) -> ReflectionPlane {
        ReflectionPlane::from_vector(Vector3::new(n[0], n[1], n[2]), d).unwrap()
    }

    fn plane_at_angle(phi: f64) -> ReflectionPlane {
        // Plane through the z-axis whose normal lies at angle phi in the xy-plane.
        ReflectionPlane::new(Vector3::new(phi.cos(), phi.sin(), 0.0), 0.0).unwrap()
    }

    /// Independent closure oracle: repeated multiplication with a coarse
    /// rounding key instead of distance-based dedup.
    fn closure_order_oracle(planes: &[ReflectionPlane]) -> usize {
        use std::collections::BTreeSet;
        let key = |t: &RigidTransform| -> Vec<i64> {
            t.flatten().iter().map(|x| (x * 1e5).round() as i64).collect()
        };
        let gens: Vec<RigidTransform> = planes.iter().map(reflection_to_transform).collect();
        let mut seen = BTreeSet::new();
        let mut all = vec![RigidTransform::identity()];
        seen.insert(key(&all[0]));
        loop {
            let mut added = false;
            let snapshot = all.clone();
            for e in &snapshot {
                for g in &gens {
                    let c = compose(e, g).orthonormalized();
                    if seen.insert(key(&c)) {
                        all.push(c);
                        added = true;
                    }
                }
            }
            if !added || all.len() > 1000 {
                return all.len();
            }
        }
    }

    #[test]
    fn single_reflection_gives_order_two() {
        let gens = GeneratorSet::new(vec![plane([1.0, 0.0, 0.0], 0.0)]).unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        assert_eq!(g.order(), 2);
    }

    #[test]
    fn orthogonal_reflections_give_klein_four() {
        let gens = GeneratorSet::new(vec![
            plane([1.0, 0.0, 0.0], 0.0),
            plane([0.0, 1.0, 0.0], 0.0),
        ])
        .unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(
            closure_order_oracle(&gens.active()),
            4,
            "oracle disagrees on Klein four-group"
        );
    }

    #[test]
    fn dihedral_angle_pi_over_three_gives_order_six() {
        let gens = GeneratorSet::new(vec![
            plane_at_angle(0.0),
            plane_at_angle(std::f64::consts::PI / 3.0),
        ])
        .unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        assert_eq!(g.order(), 6);
        assert_eq!(closure_order_oracle(&gens.active()), 6);
    }

    #[test]
    fn dihedral_order_law() {
        for k in 2..=36usize {
            let gens = GeneratorSet::new(vec![
                plane_at_angle(0.0),
                plane_at_angle(std::f64::consts::PI / k as f64),
            ])
            .unwrap();
            let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
            assert_eq!(g.order(), 2 * k, "dihedral order law failed for k={k}");
        }
    }

    #[test]
    fn irrational_angle_fails_closure() {
        let gens = GeneratorSet::new(vec![plane_at_angle(0.0), plane_at_angle(1.0)]).unwrap();
        assert!(matches!(
            generate_group(&gens, DEFAULT_MAX_ORDER),
            Err(Error::NonTerminatingGroup { .. })
        ));
    }

    #[test]
    fn parallel_distinct_planes_fail_closure() {
        let gens = GeneratorSet::new(vec![
            plane([1.0, 0.0, 0.0], 0.0),
            plane([1.0, 0.0, 0.0], 0.5),
        ])
        .unwrap();
        assert!(generate_group(&gens, DEFAULT_MAX_ORDER).is_err());
    }

    #[test]
    fn group_axioms_hold() {
        let gens = GeneratorSet::new(vec![
            plane_at_angle(0.0),
            plane_at_angle(std::f64::consts::FRAC_PI_4),
            plane([0.0, 0.0, 1.0], 0.0),
        ])
        .unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        assert_eq!(g.order(), 16);
        let contains = |t: &RigidTransform| {
            g.elements()
                .iter()
                .any(|e| e.distance(t) < ELEMENT_DEDUP_TOL)
        };
        assert!(contains(&RigidTransform::identity()));
        for a in g.elements() {
            assert!(contains(&a.inverse()), "inverse missing");
            for b in g.elements() {
                assert!(contains(&compose(a, b).orthonormalized()), "not closed");
            }
        }
    }

    #[test]
    fn apply_identity_group_is_noop() {
        let gens = GeneratorSet::empty();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        let c = PointCloud::from_points(vec![Point3::new(0.4, 0.2, -0.1)]).unwrap();
        let out = apply_group(&g, &c, false);
        assert_eq!(out.points(), c.points());
    }

    #[test]
    fn apply_mirror_doubles_points() {
        let gens = GeneratorSet::new(vec![plane([1.0, 0.0, 0.0], 0.0)]).unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        let c = PointCloud::from_points(vec![Point3::new(1.0, 0.0, 0.0)]).unwrap();
        let out = apply_group(&g, &c, false);
        assert_eq!(out.len(), 2);
        assert!(out
            .points()
            .iter()
            .any(|p| (p - Point3::new(1.0, 0.0, 0.0)).norm() < 1e-12));
        assert!(out
            .points()
            .iter()
            .any(|p| (p - Point3::new(-1.0, 0.0, 0.0)).norm() < 1e-12));
    }

    #[test]
    fn apply_order_four_group_multiplies_count() {
        let mut rng = StdRng::seed_from_u64(3);
        let gens = GeneratorSet::new(vec![
            plane([1.0, 0.0, 0.0], 0.0),
            plane([0.0, 1.0, 0.0], 0.0),
        ])
        .unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        let c = PointCloud::from_points(
            (0..5)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.1..1.0),
                        rng.gen_range(0.1..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        assert_eq!(apply_group(&g, &c, false).len(), 20);
    }

    #[test]
    fn dedup_collapses_coincident_images() {
        let gens = GeneratorSet::new(vec![plane([1.0, 0.0, 0.0], 0.0)]).unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        // A point on the mirror maps to itself.
        let c = PointCloud::from_points(vec![Point3::new(0.0, 0.3, 0.2)]).unwrap();
        assert_eq!(apply_group(&g, &c, false).len(), 2);
        assert_eq!(apply_group(&g, &c, true).len(), 1);
    }

    #[test]
    fn halfspace_split_for_single_mirror() {
        let mut rng = StdRng::seed_from_u64(4);
        let gens = GeneratorSet::new(vec![plane([1.0, 0.0, 0.0], 0.0)]).unwrap();
        let mirror = plane([1.0, 0.0, 0.0], 0.0);
        let mut pts = Vec::new();
        for _ in 0..32 {
            let p = Point3::new(
                rng.gen_range(0.05..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            pts.push(p);
            pts.push(crate::geom::reflect_point(&mirror, &p));
        }
        let c = PointCloud::from_points(pts).unwrap();
        let fd = extract_fundamental_domain(&gens, &c).unwrap();
        assert_eq!(fd.len(), 32);
        for &i in fd.indices() {
            assert!(c.points()[i].x >= -BOUNDARY_EPS);
        }
    }

    #[test]
    fn identity_group_keeps_all_indices() {
        let mut rng = StdRng::seed_from_u64(5);
        let c = PointCloud::from_points(
            (0..20)
                .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen()))
                .collect(),
        )
        .unwrap();
        let fd = extract_fundamental_domain(&GeneratorSet::empty(), &c).unwrap();
        assert_eq!(fd.len(), 20);
    }

    #[test]
    fn four_fold_rotational_cloud_recovers_wedge() {
        // Build a cloud by applying the order-8 group generated by mirrors at
        // dihedral angle pi/4 to a random seed strictly inside the wedge.
        let mut rng = StdRng::seed_from_u64(6);
        let p0 = plane_at_angle(0.0);
        let p1 = plane_at_angle(std::f64::consts::FRAC_PI_4);
        let gens = GeneratorSet::new(vec![p0, p1]).unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        assert_eq!(g.order(), 8);
        let m = 12;
        let seed = PointCloud::from_points(
            (0..m)
                .map(|_| {
                    let phi = rng.gen_range(0.05..std::f64::consts::FRAC_PI_4 - 0.05);
                    let r = rng.gen_range(0.3..1.0);
                    Point3::new(r * phi.cos(), r * phi.sin(), rng.gen_range(-0.5..0.5))
                })
                .collect(),
        )
        .unwrap();
        let c = apply_group(&g, &seed, false);
        let fd = extract_fundamental_domain(&gens, &c).unwrap();
        assert_eq!(fd.len(), m);
        let recon = apply_group(&g, &fd.to_cloud(&c).unwrap(), false);
        assert!(chamfer(&c, &recon) < 1e-10);
    }

    #[test]
    fn validate_exactly_symmetric_cloud() {
        let mut rng = StdRng::seed_from_u64(7);
        let gens = GeneratorSet::new(vec![plane([1.0, 0.0, 0.0], 0.0)]).unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        let seed = PointCloud::from_points(
            (0..40)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.05..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let c = apply_group(&g, &seed, false);
        let (residual, ok) = validate_symmetry(&c, &gens, 1e-6).unwrap();
        assert!(residual < 1e-10);
        assert!(ok);
    }

    #[test]
    fn validate_rejects_random_plane_on_random_cloud() {
        let mut rng = StdRng::seed_from_u64(8);
        let c = PointCloud::from_points(
            (0..64)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let gens = GeneratorSet::new(vec![plane([0.36, 0.48, 0.8], 0.1)]).unwrap();
        let (residual, ok) = validate_symmetry(&c, &gens, 1e-3).unwrap();
        assert!(!ok, "random plane accepted with residual {residual}");
    }

    #[test]
    fn validate_noisy_symmetric_cloud() {
        let mut rng = StdRng::seed_from_u64(9);
        let sigma = 0.01;
        let gens = GeneratorSet::new(vec![plane([1.0, 0.0, 0.0], 0.0)]).unwrap();
        let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
        let seed = PointCloud::from_points(
            (0..128)
                .map(|_| {
                    Point3::new(
                        rng.gen_range(0.05..1.0),
                        rng.gen_range(-1.0..1.0),
                        rng.gen_range(-1.0..1.0),
                    )
                })
                .collect(),
        )
        .unwrap();
        let exact = apply_group(&g, &seed, false);
        let noisy = PointCloud::from_points(
            exact
                .points()
                .iter()
                .map(|p| {
                    Point3::new(
                        p.x + sigma * gauss(&mut rng),
                        p.y + sigma * gauss(&mut rng),
                        p.z + sigma * gauss(&mut rng),
                    )
                })
                .collect(),
        )
        .unwrap();
        let (residual, _) = validate_symmetry(&noisy, &gens, DEFAULT_COVERAGE_TOL).unwrap();
        assert!(residual < 5.0 * sigma, "residual {residual}");
    }

    fn gauss(rng: &mut StdRng) -> f64 {
        use rand_distr::Distribution;
        rand_distr::StandardNormal.sample(rng)
    }

    #[test]
    fn reconstruction_identity_property() {
        let mut rng = StdRng::seed_from_u64(10);
        for trial in 0..20 {
            let k = rng.gen_range(2..7usize);
            let gens = GeneratorSet::new(vec![
                plane_at_angle(0.0),
                plane_at_angle(std::f64::consts::PI / k as f64),
            ])
            .unwrap();
            let g = generate_group(&gens, DEFAULT_MAX_ORDER).unwrap();
            let seed = PointCloud::from_points(
                (0..8)
                    .map(|_| {
                        let phi = rng.gen_range(0.02..std::f64::consts::PI / k as f64 - 0.02);
                        let r = rng.gen_range(0.2..1.0);
                        Point3::new(r * phi.cos(), r * phi.sin(), rng.gen_range(-0.4..0.4))
                    })
                    .collect(),
            )
            .unwrap();
            let c = apply_group(&g, &seed, false);
            let fd = extract_fundamental_domain(&gens, &c).unwrap();
            let recon = apply_group(&g, &fd.to_cloud(&c).unwrap(), false);
            assert!(
                chamfer(&c, &recon) < 1e-9,
                "trial {trial} k={k} failed reconstruction"
            );
        }
    }

    #[test]
    fn monotone_domain_cardinality_with_more_generators() {
        let mut rng = StdRng::seed_from_u64(11);
        let p0 = plane_at_angle(0.0);
        let p1 = plane_at_angle(std::f64::consts::FRAC_PI_4);
        let both = GeneratorSet::new(vec![p0, p1]).unwrap();
        let one = GeneratorSet::new(vec![p0]).unwrap();
        let g = generate_group(&both, DEFAULT_MAX_ORDER).unwrap();
        let seed = PointCloud::from_points(
            (0..10)
                .map(|_| {
                    let phi = rng.gen_range(0.03..std::f64::consts::FRAC_PI_4 - 0.03);
                    let r = rng.gen_range(0.2..1.0);
                    Point3::new(r * phi.cos(), r * phi.sin(), rng.gen_range(-0.3..0.3))
                })
                .collect(),
        )
        .unwrap();
        let c = apply_group(&g, &seed, false);
        let fd_one = extract_fundamental_domain(&one, &c).unwrap();
        let fd_both = extract_fundamental_domain(&both, &c).unwrap();
        assert!(fd_both.len() <= fd_one.len());
    }

    #[test]
    fn snapping_adjusts_near_miss_angles() {
        let theta = std::f64::consts::FRAC_PI_4 + 0.01; // ~0.57 degrees off
        let gens = GeneratorSet::new(vec![plane_at_angle(0.0), plane_at_angle(theta)]).unwrap();
        let snapped = snap_generators(&gens).unwrap();
        let planes = snapped.active();
        let cos = planes[0].normal().dot(&planes[1].normal()).abs();
        assert!((cos.acos() - std::f64::consts::FRAC_PI_4).abs() < 1e-12);
        let g = generate_group(&snapped, DEFAULT_MAX_ORDER).unwrap();
        assert_eq!(g.order(), 8);
    }

    #[test]
    fn snapping_rejects_far_angles() {
        // 0.6 rad is more than 1.5 degrees from every pi/k target.
        let gens = GeneratorSet::new(vec![plane_at_angle(0.0), plane_at_angle(0.6)]).unwrap();
        assert!(matches!(
            snap_generators(&gens),
            Err(Error::UnsnappableAngle { .. })
        ));
    }

    #[test]
    fn snapping_preserves_intersection_line() {
        // Offset planes meeting away from the origin.
        let a = plane([1.0, 0.0, 0.0], 0.3);
        let b_angle = std::f64::consts::PI / 3.0 + 0.005;
        let nb = Vector3::new(b_angle.cos(), b_angle.sin(), 0.0);
        let b = ReflectionPlane::new(nb, 0.7).unwrap();
        let gens = GeneratorSet::new(vec![a, b]).unwrap();
        let snapped = snap_generators(&gens).unwrap();
        // The point q on the original intersection line and the line direction
        // (z axis) must stay on the snapped plane.
        let cos = a.normal().dot(&b.normal());
        let denom = 1.0 - cos * cos;
        let alpha = (a.offset() - cos * b.offset()) / denom;
        let beta = (b.offset() - cos * a.offset()) / denom;
        let q = Point3::from(alpha * a.normal() + beta * b.normal());
        let q2 = Point3::from(q.coords + Vector3::new(0.0, 0.0, 1.0));
        for p in snapped.active() {
            assert!(p.signed_distance(&q).abs() < 1e-9, "q off plane");
            assert!(p.signed_distance(&q2).abs() < 1e-9, "line direction off plane");
        }
    }

    #[test]
    fn flat_round_trip() {
        let gens = GeneratorSet::new(vec![
            plane([1.0, 0.0, 0.0], 0.25),
            plane([0.0, 1.0, 0.0], -0.5),
        ])
        .unwrap();
        let flat = gens.to_flat();
        let back = GeneratorSet::from_flat(&flat).unwrap();
        assert_eq!(gens, back);
    }

    #[test]
    fn generator_set_rejects_duplicates() {
        let p = plane([1.0, 0.0, 0.0], 0.0);
        assert!(matches!(
            GeneratorSet::new(vec![p, p]),
            Err(Error::DuplicateGenerator)
        ));
    }
}
