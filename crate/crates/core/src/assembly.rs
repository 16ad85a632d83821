//! Part assemblers: 9-parameter translation/rotation/scale transforms, full
//! shape composition, least-squares assembler fitting, and nonparametric
//! assembler sampling.

use nalgebra::{Matrix3, Vector3};
use rand::Rng;

use crate::geom::{Point3, PointCloud};
use crate::sampler::{langevin_sample, LangevinConfig, NoiseSchedule, VectorDb};
use crate::{Error, Result};

/// Sampled scales are clamped to at least this value.
pub const SCALE_CLAMP: f64 = 1e-3;
/// Pitch angles within this of +/- pi/2 are treated as gimbal-locked.
const GIMBAL_EPS: f64 = 1e-6;

/// A part-placement transform applied as scale, then rotate, then translate:
/// `p' = R * (scale . p) + translation`. Rotation is intrinsic X-Y-Z Euler
/// angles in radians; scales are per-axis and strictly positive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Assembler {
    pub translation: Vector3<f64>,
    pub rotation: [f64; 3],
    pub scale: Vector3<f64>,
}

impl Assembler {
    pub fn new(translation: Vector3<f64>, rotation: [f64; 3], scale: Vector3<f64>) -> Result<Self> {
        if !(scale.x > 0.0 && scale.y > 0.0 && scale.z > 0.0) {
            return Err(Error::InvalidConfig("scale components must be positive".into()));
        }
        let pi = std::f64::consts::PI;
        if rotation.iter().any(|a| !(*a > -pi && *a <= pi) || !a.is_finite()) {
            return Err(Error::InvalidConfig("angles must lie in (-pi, pi]".into()));
        }
        Ok(Self {
            translation,
            rotation,
            scale,
        })
    }

    pub fn identity() -> Self {
        Self {
            translation: Vector3::zeros(),
            rotation: [0.0; 3],
            scale: Vector3::new(1.0, 1.0, 1.0),
        }
    }

    /// `Rx(rx) * Ry(ry) * Rz(rz)` (intrinsic X-Y-Z).
    pub fn rotation_matrix(&self) -> Matrix3<f64> {
        use nalgebra::Rotation3;
        let [rx, ry, rz] = self.rotation;
        (Rotation3::from_axis_angle(&Vector3::x_axis(), rx)
            * Rotation3::from_axis_angle(&Vector3::y_axis(), ry)
            * Rotation3::from_axis_angle(&Vector3::z_axis(), rz))
        .into_inner()
    }

    /// Flat 9-parameter block: translation, rotation, scale.
    pub fn to_params(&self) -> [f64; 9] {
        [
            self.translation.x,
            self.translation.y,
            self.translation.z,
            self.rotation[0],
            self.rotation[1],
            self.rotation[2],
            self.scale.x,
            self.scale.y,
            self.scale.z,
        ]
    }

    pub fn from_params(p: &[f64; 9]) -> Result<Self> {
        Self::new(
            Vector3::new(p[0], p[1], p[2]),
            [p[3], p[4], p[5]],
            Vector3::new(p[6], p[7], p[8]),
        )
    }

    pub fn apply_point(&self, p: &Point3) -> Point3 {
        let scaled = Vector3::new(
            self.scale.x * p.x,
            self.scale.y * p.y,
            self.scale.z * p.z,
        );
        Point3::from(self.rotation_matrix() * scaled + self.translation)
    }

    /// Exact inverse map `p = S^-1 R^T (p' - t)`.
    pub fn invert_point(&self, p: &Point3) -> Point3 {
        let local = self.rotation_matrix().transpose() * (p.coords - self.translation);
        Point3::new(
            local.x / self.scale.x,
            local.y / self.scale.y,
            local.z / self.scale.z,
        )
    }
}

/// Per-part assemblers for one shape.
#[derive(Debug, Clone, PartialEq)]
pub struct AssemblerSet {
    items: Vec<Assembler>,
}

impl AssemblerSet {
    pub fn new(items: Vec<Assembler>) -> Result<Self> {
        if items.is_empty() {
            return Err(Error::InvalidConfig("assembler set needs at least one part".into()));
        }
        Ok(Self { items })
    }

    pub fn items(&self) -> &[Assembler] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Flat `9 * M` record, part-major.
    pub fn to_flat(&self) -> Vec<f64> {
        self.items
            .iter()
            .flat_map(|a| a.to_params().to_vec())
            .collect()
    }

    pub fn from_flat(v: &[f64]) -> Result<Self> {
        if v.is_empty() || !v.len().is_multiple_of(9) {
            return Err(Error::DimensionMismatch {
                expected: 9,
                got: v.len(),
            });
        }
        let items = v
            .chunks_exact(9)
            .map(|c| {
                let arr: [f64; 9] = c.try_into().expect("chunk length is 9");
                Assembler::from_params(&arr)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(items)
    }
}

/// Applies the assembler to every point; labels pass through unchanged.
pub fn apply_assembler(t: &Assembler, part: &PointCloud) -> PointCloud {
    PointCloud::new(
        part.points().iter().map(|p| t.apply_point(p)).collect(),
        part.labels().map(|l| l.to_vec()),
    )
    .expect("transforming a valid cloud keeps it valid")
}

/// Union of the transformed parts; output points carry their part index as
/// label, so the composed shape's labels partition it exactly.
pub fn compose_shape(parts: &[PointCloud], ts: &AssemblerSet) -> Result<PointCloud> {
    if parts.len() != ts.len() {
        return Err(Error::DimensionMismatch {
            expected: ts.len(),
            got: parts.len(),
        });
    }
    let mut points = Vec::with_capacity(parts.iter().map(PointCloud::len).sum());
    let mut labels = Vec::with_capacity(points.capacity());
    for (j, (part, t)) in parts.iter().zip(ts.items()).enumerate() {
        for p in part.points() {
            points.push(t.apply_point(p));
            labels.push(j);
        }
    }
    PointCloud::new(points, Some(labels))
}

/// Fit result: the recovered assembler and the RMS point residual.
#[derive(Debug, Clone)]
pub struct FittedAssembler {
    pub assembler: Assembler,
    pub residual_rms: f64,
}

/// Least-squares similarity fit of `placed ~ R * (s . canonical) + t` with
/// per-axis scale: rotation by orthogonal Procrustes on scale-whitened
/// coordinates, scale from coordinate-wise spread ratios in the rotated
/// frame, translation from centroids.
pub fn fit_assembler(canonical: &PointCloud, placed: &PointCloud) -> Result<FittedAssembler> {
    if canonical.len() != placed.len() {
        return Err(Error::UnequalSizes {
            a: canonical.len(),
            b: placed.len(),
        });
    }
    let n = canonical.len() as f64;
    let mu_a = canonical.centroid();
    let mu_b = placed.centroid();
    let demean = |c: &PointCloud, mu: &Vector3<f64>| -> Vec<Vector3<f64>> {
        c.points().iter().map(|p| p.coords - mu).collect()
    };
    let a = demean(canonical, &mu_a);
    let b = demean(placed, &mu_b);

    // Second moments; a rank-deficient canonical spread leaves some scale
    // unobservable.
    let mut n_mat = Matrix3::zeros();
    let mut h_mat = Matrix3::zeros();
    for (ai, bi) in a.iter().zip(b.iter()) {
        n_mat += ai * ai.transpose();
        h_mat += bi * ai.transpose();
    }
    let eig = n_mat.symmetric_eigen();
    let max_eig = eig.eigenvalues.iter().fold(0.0f64, |m, &v| m.max(v));
    let (min_idx, &min_eig) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .min_by(|x, y| x.1.total_cmp(y.1))
        .expect("three eigenvalues");
    if min_eig <= 1e-12 * max_eig.max(1e-300) {
        let null_dir = eig.eigenvectors.column(min_idx);
        let axis = (0..3)
            .max_by(|&i, &j| null_dir[i].abs().total_cmp(&null_dir[j].abs()))
            .unwrap();
        return Err(Error::DegenerateSpread { axis });
    }

    // Closed-form start: H N^-1 = R S exactly for noiseless data, so column
    // norms give the scales.
    let m = h_mat * n_mat.try_inverse().expect("full-rank moment matrix");
    let mut scale = Vector3::new(m.column(0).norm(), m.column(1).norm(), m.column(2).norm());
    for s in scale.iter_mut() {
        if s.is_nan() || *s <= 1e-12 {
            *s = 1.0;
        }
    }
    let mut rot = polar_rotation(&Matrix3::from_columns(&[
        m.column(0) / scale.x,
        m.column(1) / scale.y,
        m.column(2) / scale.z,
    ]));

    // Alternating refinement: per-axis scale regression in the rotated frame,
    // then Procrustes on the whitened coordinates.
    let mut prev_res = f64::INFINITY;
    for _ in 0..100 {
        let mut num: Vector3<f64> = Vector3::zeros();
        let mut den: Vector3<f64> = Vector3::zeros();
        for (ai, bi) in a.iter().zip(b.iter()) {
            let local = rot.transpose() * bi;
            for k in 0..3 {
                num[k] += local[k] * ai[k];
                den[k] += ai[k] * ai[k];
            }
        }
        for k in 0..3 {
            if den[k] > 0.0 && num[k] / den[k] > 1e-12 {
                scale[k] = num[k] / den[k];
            }
        }
        let mut cross = Matrix3::zeros();
        for (ai, bi) in a.iter().zip(b.iter()) {
            let sa = Vector3::new(scale.x * ai.x, scale.y * ai.y, scale.z * ai.z);
            cross += bi * sa.transpose();
        }
        rot = polar_rotation(&cross);

        let res: f64 = a
            .iter()
            .zip(b.iter())
            .map(|(ai, bi)| {
                let sa = Vector3::new(scale.x * ai.x, scale.y * ai.y, scale.z * ai.z);
                (rot * sa - bi).norm_squared()
            })
            .sum::<f64>()
            / n;
        if prev_res - res < 1e-16 {
            prev_res = res;
            break;
        }
        prev_res = res;
    }

    let translation = mu_b
        - rot * Vector3::new(scale.x * mu_a.x, scale.y * mu_a.y, scale.z * mu_a.z);
    let rotation = euler_from_matrix(&rot);
    let assembler = Assembler::new(translation, rotation, scale)?;
    Ok(FittedAssembler {
        assembler,
        residual_rms: prev_res.sqrt(),
    })
}

/// Nearest proper rotation to `m` (SVD polar with determinant correction).
fn polar_rotation(m: &Matrix3<f64>) -> Matrix3<f64> {
    let svd = m.svd(true, true);
    let u = svd.u.expect("svd with u");
    let vt = svd.v_t.expect("svd with v_t");
    let mut r = u * vt;
    if r.determinant() < 0.0 {
        let mut u_fix = u;
        u_fix.column_mut(2).neg_mut();
        r = u_fix * vt;
    }
    r
}

/// Intrinsic X-Y-Z Euler angles of a rotation matrix; yaw folds to zero
/// within [`GIMBAL_EPS`] of pitch +/- pi/2.
fn euler_from_matrix(r: &Matrix3<f64>) -> [f64; 3] {
    let sy = r[(0, 2)].clamp(-1.0, 1.0);
    if sy.abs() > 1.0 - GIMBAL_EPS {
        let ry = if sy > 0.0 {
            std::f64::consts::FRAC_PI_2
        } else {
            -std::f64::consts::FRAC_PI_2
        };
        let rx = if sy > 0.0 {
            r[(1, 0)].atan2(r[(1, 1)])
        } else {
            (-r[(1, 0)]).atan2(r[(1, 1)])
        };
        return [rx, ry, 0.0];
    }
    let ry = sy.asin();
    let rx = (-r[(1, 2)]).atan2(r[(2, 2)]);
    let rz = (-r[(0, 1)]).atan2(r[(0, 0)]);
    [rx, ry, rz]
}

fn wrap_angle(a: f64) -> f64 {
    let pi = std::f64::consts::PI;
    if a > -pi && a <= pi {
        return a;
    }
    let w = a.rem_euclid(2.0 * pi);
    if w > pi {
        w - 2.0 * pi
    } else {
        w
    }
}

/// Decodes raw sampled `9 * M` parameters: scales clamp to
/// [`SCALE_CLAMP`], angles wrap into `(-pi, pi]`.
pub fn project_assembler_params(raw: &[f64]) -> Result<AssemblerSet> {
    if raw.is_empty() || !raw.len().is_multiple_of(9) {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: raw.len(),
        });
    }
    let items = raw
        .chunks_exact(9)
        .map(|c| {
            Assembler::new(
                Vector3::new(c[0], c[1], c[2]),
                [wrap_angle(c[3]), wrap_angle(c[4]), wrap_angle(c[5])],
                Vector3::new(
                    c[6].max(SCALE_CLAMP),
                    c[7].max(SCALE_CLAMP),
                    c[8].max(SCALE_CLAMP),
                ),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    AssemblerSet::new(items)
}

/// Samples an assembler set by annealed Langevin dynamics over a database of
/// flattened `9 * M` assembler records.
pub fn sample_assembler_set<R: Rng>(
    db: &VectorDb,
    sched: &NoiseSchedule,
    cfg: &LangevinConfig,
    rng: &mut R,
) -> Result<AssemblerSet> {
    if db.dim() == 0 || !db.dim().is_multiple_of(9) {
        return Err(Error::DimensionMismatch {
            expected: 9,
            got: db.dim(),
        });
    }
    let raw = langevin_sample(db, sched, cfg, rng)?;
    project_assembler_params(&raw)
}
