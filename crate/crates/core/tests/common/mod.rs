//! Shared synthetic fixtures for the integration suites.

use nalgebra::Vector3;
use rand::rngs::StdRng;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use symcloud_core::geom::{normalize_cloud, reflect_point, Point3, PointCloud, ReflectionPlane};

pub fn gauss(rng: &mut StdRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_unit(rng: &mut StdRng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(gauss(rng), gauss(rng), gauss(rng));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

/// Blob-mixture cloud mirrored across `plane`: `half` seed points in a few
/// Gaussian clusters plus their reflections, normalized, then perturbed with
/// `noise` (applied after normalization). Returns the cloud and the planted
/// mirror expressed in the normalized frame.
pub fn planted_mirror_cloud(
    rng: &mut StdRng,
    half: usize,
    plane: &ReflectionPlane,
    noise: f64,
) -> (PointCloud, ReflectionPlane) {
    let n_blobs = 4;
    let centers: Vec<Vector3<f64>> = (0..n_blobs)
        .map(|_| {
            Vector3::new(
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
                rng.gen_range(-0.8..0.8),
            )
        })
        .collect();
    let mut pts = Vec::with_capacity(2 * half);
    for i in 0..half {
        let c = centers[i % n_blobs];
        let p = Point3::from(c + 0.12 * Vector3::new(gauss(rng), gauss(rng), gauss(rng)));
        pts.push(p);
        pts.push(reflect_point(plane, &p));
    }
    let cloud = PointCloud::from_points(pts).expect("non-empty fixture");
    let (normalized, frame) = normalize_cloud(&cloud).expect("non-degenerate fixture");
    let plane_norm = frame.plane_to_normalized(plane);
    if noise == 0.0 {
        return (normalized, plane_norm);
    }
    let noisy = PointCloud::from_points(
        normalized
            .points()
            .iter()
            .map(|p| {
                Point3::new(
                    p.x + noise * gauss(rng),
                    p.y + noise * gauss(rng),
                    p.z + noise * gauss(rng),
                )
            })
            .collect(),
    )
    .expect("non-empty fixture");
    (noisy, plane_norm)
}

/// A random mirror plane through a point near the origin.
pub fn random_mirror(rng: &mut StdRng) -> ReflectionPlane {
    let normal = random_unit(rng);
    let anchor = Vector3::new(
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
        rng.gen_range(-0.3..0.3),
    );
    ReflectionPlane::new(normal, normal.dot(&anchor)).expect("unit normal")
}
