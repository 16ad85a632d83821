//! Nonparametric score-based generation via annealed Langevin dynamics with
//! the empirical kernel score of a vector database.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::symgroup::{generate_group, snap_generators, GeneratorSet, DEFAULT_MAX_ORDER};
use crate::{Error, Result};

/// Raw slots with normal magnitude below this decode as inactive.
pub const SLOT_ACTIVITY_THRESHOLD: f64 = 0.5;
/// Resampling attempts before a generator draw is abandoned.
pub const GENERATOR_SAMPLE_RETRIES: usize = 8;
/// Default annealing schedule: 50 geometric noise levels from 1.0 down to 0.01.
pub const DEFAULT_TAU: usize = 50;
pub const DEFAULT_GAMMA_MAX: f64 = 1.0;
pub const DEFAULT_GAMMA_MIN: f64 = 0.01;
/// Default Langevin steps per noise level.
pub const DEFAULT_INNER_STEPS: usize = 10;

/// Per-step noise magnitudes `sigma_1..sigma_tau` with the derived cumulative
/// scales `gamma_t = sqrt(sum_{i<=t} sigma_i^2)`, strictly increasing in `t`.
/// Sampling anneals from `gamma_tau` down to `gamma_1`.
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    sigmas: Vec<f64>,
    cum_var: Vec<f64>,
}

impl NoiseSchedule {
    pub fn from_sigmas(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidConfig("schedule needs at least one level".into()));
        }
        if sigmas.iter().any(|s| s.is_nan() || *s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidConfig("sigmas must be positive and finite".into()));
        }
        let mut cum_var = Vec::with_capacity(sigmas.len());
        let mut acc = 0.0;
        for s in &sigmas {
            acc += s * s;
            cum_var.push(acc);
        }
        Ok(Self { sigmas, cum_var })
    }

    /// Geometric gamma ladder `gamma_1 = gamma_min .. gamma_tau = gamma_max`
    /// with the sigmas back-solved from `sigma_t^2 = gamma_t^2 - gamma_{t-1}^2`.
    pub fn geometric(tau: usize, gamma_min: f64, gamma_max: f64) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidConfig("tau must be >= 1".into()));
        }
        if gamma_min.is_nan() || gamma_max.is_nan() || gamma_min <= 0.0 || gamma_max < gamma_min {
            return Err(Error::InvalidConfig("need 0 < gamma_min <= gamma_max".into()));
        }
        let mut sigmas = Vec::with_capacity(tau);
        let mut prev_var = 0.0;
        for t in 0..tau {
            let frac = if tau == 1 { 0.0 } else { t as f64 / (tau - 1) as f64 };
            let gamma = gamma_min * (gamma_max / gamma_min).powf(frac);
            let var = gamma * gamma;
            sigmas.push((var - prev_var).sqrt());
            prev_var = var;
        }
        Self::from_sigmas(sigmas)
    }

    pub fn tau(&self) -> usize {
        self.sigmas.len()
    }

    /// Per-step sigma, 1-based step index.
    pub fn sigma(&self, t: usize) -> f64 {
        assert!((1..=self.tau()).contains(&t), "step {t} out of range");
        self.sigmas[t - 1]
    }

    /// Cumulative noise scale `gamma_t`, 1-based step index.
    pub fn gamma(&self, t: usize) -> f64 {
        self.gamma2(t).sqrt()
    }

    /// `gamma_t^2`, the cumulative variance, exactly as accumulated.
    pub fn gamma2(&self, t: usize) -> f64 {
        assert!((1..=self.tau()).contains(&t), "step {t} out of range");
        self.cum_var[t - 1]
    }
}

impl Default for NoiseSchedule {
    fn default() -> Self {
        Self::geometric(DEFAULT_TAU, DEFAULT_GAMMA_MIN, DEFAULT_GAMMA_MAX)
            .expect("default schedule parameters are valid")
    }
}

/// Langevin step counts and step sizes; `betas = None` uses `beta_t = gamma_t^2`.
#[derive(Debug, Clone)]
pub struct LangevinConfig {
    steps_per_level: usize,
    betas: Option<Vec<f64>>,
}

impl LangevinConfig {
    pub fn new(steps_per_level: usize) -> Result<Self> {
        if steps_per_level == 0 {
            return Err(Error::InvalidConfig("need at least one Langevin step per level".into()));
        }
        Ok(Self {
            steps_per_level,
            betas: None,
        })
    }

    pub fn with_betas(steps_per_level: usize, betas: Vec<f64>) -> Result<Self> {
        if betas.iter().any(|b| b.is_nan() || *b <= 0.0) {
            return Err(Error::InvalidConfig("step sizes must be positive".into()));
        }
        let mut cfg = Self::new(steps_per_level)?;
        cfg.betas = Some(betas);
        Ok(cfg)
    }

    pub fn steps_per_level(&self) -> usize {
        self.steps_per_level
    }

    pub fn beta(&self, t: usize, sched: &NoiseSchedule) -> f64 {
        match &self.betas {
            Some(b) => b[t - 1],
            None => sched.gamma2(t),
        }
    }
}

impl Default for LangevinConfig {
    fn default() -> Self {
        Self::new(DEFAULT_INNER_STEPS).expect("default step count is valid")
    }
}

/// Non-empty database of fixed-dimension vectors (flattened generator sets,
/// assembler parameter blocks, ...).
#[derive(Debug, Clone)]
pub struct VectorDb {
    entries: Vec<Vec<f64>>,
    dim: usize,
}

impl VectorDb {
    pub fn new(entries: Vec<Vec<f64>>) -> Result<Self> {
        let dim = entries.first().map(Vec::len).ok_or(Error::EmptyDb)?;
        for e in &entries {
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: e.len(),
                });
            }
        }
        Ok(Self { entries, dim })
    }

    pub fn from_generator_sets(sets: &[GeneratorSet]) -> Result<Self> {
        Self::new(sets.iter().map(|g| g.to_flat().to_vec()).collect())
    }

    pub fn entries(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn standard_normal_vec<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// Forward perturbation `v0 + gamma_t * eps` with standard normal `eps`.
pub fn perturb<R: Rng>(v0: &[f64], t: usize, sched: &NoiseSchedule, rng: &mut R) -> Vec<f64> {
    let gamma = sched.gamma(t);
    v0.iter()
        .map(|x| {
            let eps: f64 = StandardNormal.sample(rng);
            x + gamma * eps
        })
        .collect()
}

/// Kernel-weighted mean of the database under the isotropic Gaussian with
/// scale `gamma`, log-sum-exp stabilized.
fn weighted_mean(v: &[f64], gamma: f64, db: &VectorDb) -> Result<Vec<f64>> {
    let g2 = gamma * gamma;
    let d2s: Vec<f64> = db
        .entries
        .iter()
        .map(|e| e.iter().zip(v.iter()).map(|(a, b)| (a - b) * (a - b)).sum())
        .collect();
    let d2_min = d2s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    if !d2_min.is_finite() {
        return Err(Error::ScoreUndefined);
    }
    let mut wsum = 0.0;
    let mut acc = vec![0.0f64; db.dim()];
    for (e, &d2) in db.entries.iter().zip(d2s.iter()) {
        // Stabilized weight relative to the nearest entry; in the gamma -> 0
        // limit only nearest entries keep weight.
        let w = if g2 == 0.0 {
            if d2 <= d2_min {
                1.0
            } else {
                0.0
            }
        } else {
            (-(d2 - d2_min) / (2.0 * g2)).exp()
        };
        if w == 0.0 {
            continue;
        }
        wsum += w;
        for (a, x) in acc.iter_mut().zip(e.iter()) {
            *a += w * x;
        }
    }
    if wsum == 0.0 || !wsum.is_finite() {
        return Err(Error::ScoreUndefined);
    }
    for a in acc.iter_mut() {
        *a /= wsum;
    }
    Ok(acc)
}

/// Empirical score `(weighted_mean - v) / gamma_t^2`, the kernel estimate of
/// the gradient of the log-density of `gamma_t`-perturbed data.
pub fn empirical_score(v: &[f64], t: usize, db: &VectorDb, sched: &NoiseSchedule) -> Result<Vec<f64>> {
    if v.len() != db.dim() {
        return Err(Error::DimensionMismatch {
            expected: db.dim(),
            got: v.len(),
        });
    }
    let gamma = sched.gamma(t);
    let mean = weighted_mean(v, gamma, db)?;
    let g2 = sched.gamma2(t);
    Ok(mean
        .iter()
        .zip(v.iter())
        .map(|(m, x)| (m - x) / g2)
        .collect())
}

/// One Langevin inner update with explicit noise:
/// `v + beta * score + sqrt(2 beta) * eps`.
pub fn langevin_inner_step(
    v: &[f64],
    t: usize,
    db: &VectorDb,
    sched: &NoiseSchedule,
    beta: f64,
    eps: &[f64],
) -> Result<Vec<f64>> {
    let score = empirical_score(v, t, db, sched)?;
    let noise_scale = (2.0 * beta).sqrt();
    Ok(v.iter()
        .zip(score.iter())
        .zip(eps.iter())
        .map(|((x, s), e)| x + beta * s + noise_scale * e)
        .collect())
}

/// Annealed Langevin sampling: initialize from N(0, I) at the top noise level
/// and chain `steps_per_level` updates through levels `tau..1`.
pub fn langevin_sample<R: Rng>(
    db: &VectorDb,
    sched: &NoiseSchedule,
    cfg: &LangevinConfig,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let mut v = standard_normal_vec(db.dim(), rng);
    for t in (1..=sched.tau()).rev() {
        let beta = cfg.beta(t, sched);
        for _ in 0..cfg.steps_per_level() {
            let eps = standard_normal_vec(db.dim(), rng);
            v = langevin_inner_step(&v, t, db, sched, beta, &eps)?;
        }
    }
    Ok(v)
}

/// The `beta_t = gamma_t^2` form of the inner update, with explicit noise:
/// `weighted_mean + sqrt(2) * gamma_t * eps`. Identical to one
/// [`langevin_inner_step`] under the same noise.
pub fn meanshift_form_update_with_eps(
    v: &[f64],
    t: usize,
    db: &VectorDb,
    sched: &NoiseSchedule,
    eps: &[f64],
) -> Result<Vec<f64>> {
    if v.len() != db.dim() {
        return Err(Error::DimensionMismatch {
            expected: db.dim(),
            got: v.len(),
        });
    }
    let gamma = sched.gamma(t);
    let mean = weighted_mean(v, gamma, db)?;
    let noise_scale = std::f64::consts::SQRT_2 * gamma;
    Ok(mean
        .iter()
        .zip(eps.iter())
        .map(|(m, e)| m + noise_scale * e)
        .collect())
}

/// As [`meanshift_form_update_with_eps`] with noise drawn from `rng`.
pub fn meanshift_form_update<R: Rng>(
    v: &[f64],
    t: usize,
    db: &VectorDb,
    sched: &NoiseSchedule,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let eps = standard_normal_vec(db.dim(), rng);
    meanshift_form_update_with_eps(v, t, db, sched, &eps)
}

/// Decodes a raw 12-vector into a generator set: slots with normal magnitude
/// below [`SLOT_ACTIVITY_THRESHOLD`] are inactive, the rest are re-unitized,
/// canonicalized, and deduplicated, active slots first.
pub fn project_generator_slots(raw: &[f64]) -> Result<GeneratorSet> {
    if raw.len() != 12 {
        return Err(Error::DimensionMismatch {
            expected: 12,
            got: raw.len(),
        });
    }
    let mut planes: Vec<crate::geom::ReflectionPlane> = Vec::new();
    for slot in raw.chunks_exact(4) {
        let n = nalgebra::Vector3::new(slot[0], slot[1], slot[2]);
        let norm = n.norm();
        if norm < SLOT_ACTIVITY_THRESHOLD {
            continue;
        }
        let plane = crate::geom::ReflectionPlane::new(n / norm, slot[3])?;
        if planes
            .iter()
            .all(|p| crate::symgroup::embedding_distance(p, &plane) >= 1e-6)
        {
            planes.push(plane);
        }
    }
    GeneratorSet::new(planes)
}

/// Samples a generator set: Langevin draw in 12 dimensions, slot projection,
/// angle snapping, and a finite-group check, retrying up to
/// [`GENERATOR_SAMPLE_RETRIES`] times.
pub fn sample_generator_set<R: Rng>(
    db: &VectorDb,
    sched: &NoiseSchedule,
    cfg: &LangevinConfig,
    rng: &mut R,
) -> Result<GeneratorSet> {
    if db.dim() != 12 {
        return Err(Error::DimensionMismatch {
            expected: 12,
            got: db.dim(),
        });
    }
    for _ in 0..=GENERATOR_SAMPLE_RETRIES {
        let raw = langevin_sample(db, sched, cfg, rng)?;
        let Ok(gens) = project_generator_slots(&raw) else {
            continue;
        };
        let Ok(snapped) = snap_generators(&gens) else {
            continue;
        };
        if generate_group(&snapped, DEFAULT_MAX_ORDER).is_ok() {
            return Ok(snapped);
        }
    }
    Err(Error::SamplingFailed {
        retries: GENERATOR_SAMPLE_RETRIES,
    })
}
