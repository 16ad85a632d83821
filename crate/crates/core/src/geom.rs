//! Core 3D types — points, labeled clouds, rigid transforms, reflections in
//! Hesse normal form — and the reflection/rotation algebra built on them.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::{Error, Result};

/// A 3D point in model units.
pub type Point3 = nalgebra::Point3<f64>;

/// Tolerance for orthogonality and unit-norm checks.
pub const ORTHO_TOL: f64 = 1e-9;
/// Components below this magnitude count as zero when canonicalizing signs.
pub const SIGN_TOL: f64 = 1e-12;

/// An ordered point set with optional per-point part labels.
///
/// Invariants: non-empty, all coordinates finite, label list (when present)
/// matches the point count and uses contiguous part ids starting at 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    labels: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>, labels: Option<Vec<usize>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::EmptyCloud);
        }
        if points.iter().any(|p| !p.coords.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidConfig("non-finite point coordinate".into()));
        }
        if let Some(ref l) = labels {
            if l.len() != points.len() {
                return Err(Error::LabelMismatch {
                    labels: l.len(),
                    points: points.len(),
                });
            }
            let parts = l.iter().max().map_or(0, |m| m + 1);
            for id in 0..parts {
                if !l.contains(&id) {
                    return Err(Error::NonContiguousLabels { found: id, parts });
                }
            }
        }
        Ok(Self { points, labels })
    }

    pub fn from_points(points: Vec<Point3>) -> Result<Self> {
        Self::new(points, None)
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false // non-empty by construction
    }

    /// Number of distinct parts (1 for unlabeled clouds).
    pub fn part_count(&self) -> usize {
        self.labels
            .as_ref()
            .and_then(|l| l.iter().max().map(|m| m + 1))
            .unwrap_or(1)
    }

    /// Points belonging to part `id`, in cloud order, with their cloud indices.
    pub fn part(&self, id: usize) -> (Vec<usize>, Vec<Point3>) {
        match &self.labels {
            None => (
                (0..self.len()).collect(),
                self.points.clone(),
            ),
            Some(l) => {
                let idx: Vec<usize> = (0..self.len()).filter(|&i| l[i] == id).collect();
                let pts = idx.iter().map(|&i| self.points[i]).collect();
                (idx, pts)
            }
        }
    }

    pub fn centroid(&self) -> Vector3<f64> {
        let sum: Vector3<f64> = self.points.iter().map(|p| p.coords).sum();
        sum / self.points.len() as f64
    }
}

/// A reflection plane `{x : normal . x = offset}` in Hesse normal form.
///
/// The stored form is canonical: the first component of the normal whose
/// magnitude exceeds [`SIGN_TOL`] is positive, so a plane and its sign-flipped
/// twin compare equal.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReflectionPlane {
    normal: Vector3<f64>,
    offset: f64,
}

impl ReflectionPlane {
    /// Builds a plane from a unit normal and signed offset, canonicalizing sign.
    pub fn new(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if (norm - 1.0).abs() > ORTHO_TOL {
            return Err(Error::NonUnitNormal { norm });
        }
        Ok(Self::canonicalize(normal, offset))
    }

    /// Builds a plane from an arbitrary nonzero normal, unitizing first.
    pub fn from_vector(normal: Vector3<f64>, offset: f64) -> Result<Self> {
        let norm = normal.norm();
        if norm < SIGN_TOL {
            return Err(Error::NonUnitNormal { norm });
        }
        Ok(Self::canonicalize(normal / norm, offset / norm))
    }

    fn canonicalize(normal: Vector3<f64>, offset: f64) -> Self {
        for c in normal.iter() {
            if c.abs() > SIGN_TOL {
                if *c < 0.0 {
                    return Self {
                        normal: -normal,
                        offset: -offset,
                    };
                }
                break;
            }
        }
        Self { normal, offset }
    }

    pub fn normal(&self) -> Vector3<f64> {
        self.normal
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// Signed distance of `p` from the plane (positive on the normal side).
    pub fn signed_distance(&self, p: &Point3) -> f64 {
        self.normal.dot(&p.coords) - self.offset
    }

    /// Embedding `(n, offset)` used by the reflection metric space.
    pub fn embed(&self) -> [f64; 4] {
        [self.normal.x, self.normal.y, self.normal.z, self.offset]
    }

    /// Inverse of [`embed`](Self::embed); re-unitizes the normal.
    pub fn from_embedding(v: &[f64; 4]) -> Result<Self> {
        Self::from_vector(Vector3::new(v[0], v[1], v[2]), v[3])
    }
}

/// An element of E(3): `x -> linear * x + translation` with orthogonal linear
/// part (det +/-1 within [`ORTHO_TOL`]).
#[derive(Debug, Clone, PartialEq)]
pub struct RigidTransform {
    linear: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    pub fn new(linear: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let dev = orthogonality_deviation(&linear);
        if dev > ORTHO_TOL {
            return Err(Error::NonOrthogonal { dev });
        }
        Ok(Self {
            linear,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            linear: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn linear(&self) -> &Matrix3<f64> {
        &self.linear
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.linear * p.coords + self.translation)
    }

    pub fn det(&self) -> f64 {
        self.linear.determinant()
    }

    /// Nearest-orthogonal projection of the linear part; keeps composition
    /// chains from drifting.
    pub fn orthonormalized(&self) -> Self {
        let svd = self.linear.svd(true, true);
        let (u, vt) = (svd.u.unwrap(), svd.v_t.unwrap());
        Self {
            linear: u * vt,
            translation: self.translation,
        }
    }

    /// Group inverse: `x -> linear^T (x - translation)`.
    pub fn inverse(&self) -> Self {
        let lt = self.linear.transpose();
        Self {
            linear: lt,
            translation: -(lt * self.translation),
        }
    }

    /// Flat 12-vector (row-major linear part then translation) used for
    /// element deduplication.
    pub fn flatten(&self) -> [f64; 12] {
        let m = &self.linear;
        [
            m[(0, 0)],
            m[(0, 1)],
            m[(0, 2)],
            m[(1, 0)],
            m[(1, 1)],
            m[(1, 2)],
            m[(2, 0)],
            m[(2, 1)],
            m[(2, 2)],
            self.translation.x,
            self.translation.y,
            self.translation.z,
        ]
    }

    /// Euclidean distance between flattened 12-vectors.
    pub fn distance(&self, other: &Self) -> f64 {
        let a = self.flatten();
        let b = other.flatten();
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }
}

fn orthogonality_deviation(m: &Matrix3<f64>) -> f64 {
    let g = m.transpose() * m - Matrix3::identity();
    g.iter().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Mirror image of `p` across `plane`: `x' = x - 2 (n.x - d) n`.
pub fn reflect_point(plane: &ReflectionPlane, p: &Point3) -> Point3 {
    let s = plane.signed_distance(p);
    Point3::from(p.coords - 2.0 * s * plane.normal())
}

/// The reflection as a rigid transform: `linear = I - 2 n n^T`,
/// `translation = 2 d n`.
pub fn reflection_to_transform(plane: &ReflectionPlane) -> RigidTransform {
    let n = plane.normal();
    let linear = Matrix3::identity() - 2.0 * n * n.transpose();
    RigidTransform {
        linear,
        translation: 2.0 * plane.offset() * n,
    }
}

/// Composition `a . b`, i.e. `x -> a(b(x))`.
pub fn compose(a: &RigidTransform, b: &RigidTransform) -> RigidTransform {
    RigidTransform {
        linear: a.linear * b.linear,
        translation: a.linear * b.translation + a.translation,
    }
}

/// `reflect(p2) . reflect(p1)`: a rotation about the intersection line of the
/// planes by twice their dihedral angle.
///
/// Identical planes give the identity. Parallel distinct planes compose to a
/// translation and are rejected: translational symmetry implies an infinite
/// shape.
pub fn rotation_from_reflections(
    p1: &ReflectionPlane,
    p2: &ReflectionPlane,
) -> Result<RigidTransform> {
    let cross = p1.normal().cross(&p2.normal());
    if cross.norm() < 1e-12 {
        // Parallel normals: same plane (identity) or a pure translation.
        let d_gap = (p1.offset() - p2.offset() * p1.normal().dot(&p2.normal())).abs();
        if d_gap < 1e-12 {
            return Ok(compose(
                &reflection_to_transform(p2),
                &reflection_to_transform(p1),
            ));
        }
        return Err(Error::TranslationResult);
    }
    Ok(compose(
        &reflection_to_transform(p2),
        &reflection_to_transform(p1),
    ))
}

/// Similarity that carried a cloud to normalized pose: `q = (p - centroid) / scale`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub centroid: Vector3<f64>,
    pub scale: f64,
}

impl Normalization {
    pub fn to_normalized(&self, p: &Point3) -> Point3 {
        Point3::from((p.coords - self.centroid) / self.scale)
    }

    pub fn from_normalized(&self, q: &Point3) -> Point3 {
        Point3::from(q.coords * self.scale + self.centroid)
    }

    /// Maps a plane given in the original frame into the normalized frame.
    pub fn plane_to_normalized(&self, plane: &ReflectionPlane) -> ReflectionPlane {
        let n = plane.normal();
        let d = (plane.offset() - n.dot(&self.centroid)) / self.scale;
        ReflectionPlane::new(n, d).expect("unit normal preserved")
    }

    /// Maps a plane given in the normalized frame back to the original frame.
    pub fn plane_from_normalized(&self, plane: &ReflectionPlane) -> ReflectionPlane {
        let n = plane.normal();
        let d = plane.offset() * self.scale + n.dot(&self.centroid);
        ReflectionPlane::new(n, d).expect("unit normal preserved")
    }
}

/// Centers the cloud at the origin and scales the farthest point to radius 1.
/// Returns the normalized cloud and the inverse-mapping metadata.
pub fn normalize_cloud(c: &PointCloud) -> Result<(PointCloud, Normalization)> {
    let centroid = c.centroid();
    let max_r = c
        .points()
        .iter()
        .map(|p| (p.coords - centroid).norm())
        .fold(0.0f64, f64::max);
    if max_r < 1e-15 {
        return Err(Error::DegenerateCloud);
    }
    let norm = Normalization {
        centroid,
        scale: max_r,
    };
    let points = c.points().iter().map(|p| norm.to_normalized(p)).collect();
    Ok((
        PointCloud::new(points, c.labels().map(|l| l.to_vec()))?,
        norm,
    ))
}

/// Resamples a cloud to exactly `target_n` points: subsampling is uniform
/// without replacement; upsampling keeps every original point once and fills
/// the remainder by random duplication.
pub fn resample_part<R: Rng>(c: &PointCloud, target_n: usize, rng: &mut R) -> Result<PointCloud> {
    if target_n == 0 {
        return Err(Error::InvalidConfig("target_n must be >= 1".into()));
    }
    let n = c.len();
    let indices: Vec<usize> = if target_n == n {
        (0..n).collect()
    } else if target_n < n {
        rand::seq::index::sample(rng, n, target_n).into_vec()
    } else {
        let mut idx: Vec<usize> = (0..n).collect();
        idx.extend((0..target_n - n).map(|_| rng.gen_range(0..n)));
        idx
    };
    let points = indices.iter().map(|&i| c.points()[i]).collect();
    let labels = c
        .labels()
        .map(|l| indices.iter().map(|&i| l[i]).collect());
    PointCloud::new(points, labels)
}
