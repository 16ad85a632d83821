//! Generic DDPM machinery: forward kernel, noise-prediction loss contract,
//! and reverse sampling, dimension-generic over flat vectors. The kernel
//! score over a vector database doubles as the analytically optimal denoiser.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::sampler::VectorDb;
use crate::{Error, Result};

/// Forward variance schedule `sigma_t in (0,1)` with `mu_t = sqrt(1 - sigma_t)`.
/// Each forward step samples `N(mu_t * z, sigma_t * I)`.
#[derive(Debug, Clone)]
pub struct DdpmSchedule {
    sigmas: Vec<f64>,
    mus: Vec<f64>,
    // Cumulative scale prod(mu_i) and marginal variance V_t = mu_t^2 V_{t-1} + sigma_t.
    cum_scale: Vec<f64>,
    cum_var: Vec<f64>,
}

impl DdpmSchedule {
    pub fn new(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidConfig("schedule needs at least one step".into()));
        }
        if sigmas.iter().any(|s| s.is_nan() || *s <= 0.0 || *s >= 1.0) {
            return Err(Error::InvalidConfig("sigmas must lie in (0, 1)".into()));
        }
        let mus: Vec<f64> = sigmas.iter().map(|s| (1.0 - s).sqrt()).collect();
        Ok(Self::with_mus(sigmas, mus))
    }

    /// Variance-accumulating regime with `mu_t = 1`; positive sigmas only.
    /// Unifies the forward chain with pure additive perturbation.
    pub fn with_unit_mus(sigmas: Vec<f64>) -> Result<Self> {
        if sigmas.is_empty() {
            return Err(Error::InvalidConfig("schedule needs at least one step".into()));
        }
        if sigmas.iter().any(|s| s.is_nan() || *s <= 0.0) {
            return Err(Error::InvalidConfig("sigmas must be positive".into()));
        }
        let mus = vec![1.0; sigmas.len()];
        Ok(Self::with_mus(sigmas, mus))
    }

    fn with_mus(sigmas: Vec<f64>, mus: Vec<f64>) -> Self {
        let mut cum_scale = Vec::with_capacity(sigmas.len());
        let mut cum_var = Vec::with_capacity(sigmas.len());
        let mut scale = 1.0;
        let mut var = 0.0;
        for (s, m) in sigmas.iter().zip(mus.iter()) {
            scale *= m;
            var = m * m * var + s;
            cum_scale.push(scale);
            cum_var.push(var);
        }
        Self {
            sigmas,
            mus,
            cum_scale,
            cum_var,
        }
    }

    /// Linearly spaced variances from `first` to `last` over `tau` steps.
    pub fn linear(first: f64, last: f64, tau: usize) -> Result<Self> {
        if tau == 0 {
            return Err(Error::InvalidConfig("tau must be >= 1".into()));
        }
        let sigmas = (0..tau)
            .map(|t| {
                let frac = if tau == 1 { 0.0 } else { t as f64 / (tau - 1) as f64 };
                first + (last - first) * frac
            })
            .collect();
        Self::new(sigmas)
    }

    pub fn tau(&self) -> usize {
        self.sigmas.len()
    }

    /// Per-step variance, 1-based index.
    pub fn sigma(&self, t: usize) -> f64 {
        assert!((1..=self.tau()).contains(&t), "step {t} out of range");
        self.sigmas[t - 1]
    }

    pub fn mu(&self, t: usize) -> f64 {
        assert!((1..=self.tau()).contains(&t), "step {t} out of range");
        self.mus[t - 1]
    }

    /// `prod_{i<=t} mu_i`: the closed-form scale on `z_0` at step `t`.
    pub fn marginal_scale(&self, t: usize) -> f64 {
        assert!((1..=self.tau()).contains(&t), "step {t} out of range");
        self.cum_scale[t - 1]
    }

    /// Marginal variance of `z_t` given `z_0` (equals `1 - prod mu_i^2` for
    /// the standard parameterization).
    pub fn marginal_var(&self, t: usize) -> f64 {
        assert!((1..=self.tau()).contains(&t), "step {t} out of range");
        self.cum_var[t - 1]
    }
}

/// Behavioral contract for the reverse process: predicts the noise component
/// of `z_t`. Output dimension must equal input dimension.
pub trait Denoiser: Sync {
    fn dim(&self) -> usize;
    fn predict_noise(&self, z: &[f64], t: usize) -> Vec<f64>;
}

fn normal_vec<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    (0..dim).map(|_| StandardNormal.sample(rng)).collect()
}

/// One forward step: a sample of `N(mu_t * z_prev, sigma_t * I)`.
pub fn forward_step<R: Rng>(z_prev: &[f64], t: usize, sched: &DdpmSchedule, rng: &mut R) -> Vec<f64> {
    let mu = sched.mu(t);
    let std = sched.sigma(t).sqrt();
    z_prev
        .iter()
        .map(|z| {
            let eps: f64 = StandardNormal.sample(rng);
            mu * z + std * eps
        })
        .collect()
}

/// Closed-form marginal sample of `z_t` given `z_0`.
pub fn forward_marginal<R: Rng>(z0: &[f64], t: usize, sched: &DdpmSchedule, rng: &mut R) -> Vec<f64> {
    let scale = sched.marginal_scale(t);
    let std = sched.marginal_var(t).sqrt();
    z0.iter()
        .map(|z| {
            let eps: f64 = StandardNormal.sample(rng);
            scale * z + std * eps
        })
        .collect()
}

/// Single-draw noise-prediction objective: with `t ~ U{1..tau}` and
/// `eps ~ N(0,I)`, returns `|eps - eps_hat(z_t, t)|^2`.
pub fn ddpm_loss<D: Denoiser, R: Rng>(den: &D, z0: &[f64], sched: &DdpmSchedule, rng: &mut R) -> f64 {
    let t = rng.gen_range(1..=sched.tau());
    let eps = normal_vec(z0.len(), rng);
    let scale = sched.marginal_scale(t);
    let std = sched.marginal_var(t).sqrt();
    let z_t: Vec<f64> = z0
        .iter()
        .zip(eps.iter())
        .map(|(z, e)| scale * z + std * e)
        .collect();
    let pred = den.predict_noise(&z_t, t);
    eps.iter()
        .zip(pred.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum()
}

/// Reverse-process standard deviations `varsigma_t`; the default realizes
/// `varsigma_t^2 = sigma_t`.
pub fn default_varsigmas(sched: &DdpmSchedule) -> Vec<f64> {
    (1..=sched.tau()).map(|t| sched.sigma(t).sqrt()).collect()
}

/// Iterative reverse sampling: `z_tau ~ N(0, I)`, then
/// `z_{t-1} ~ N(mean_from_denoiser, varsigma_t^2 I)` down to `z_0`.
pub fn reverse_sample<D: Denoiser, R: Rng>(
    den: &D,
    sched: &DdpmSchedule,
    varsigmas: &[f64],
    rng: &mut R,
) -> Result<Vec<f64>> {
    if varsigmas.len() != sched.tau() {
        return Err(Error::DimensionMismatch {
            expected: sched.tau(),
            got: varsigmas.len(),
        });
    }
    let mut z = normal_vec(den.dim(), rng);
    for t in (1..=sched.tau()).rev() {
        let eps_hat = den.predict_noise(&z, t);
        debug_assert_eq!(eps_hat.len(), z.len());
        let mu = sched.mu(t);
        let coeff = sched.sigma(t) / sched.marginal_var(t).sqrt();
        let varsigma = varsigmas[t - 1];
        z = z
            .iter()
            .zip(eps_hat.iter())
            .map(|(zt, e)| {
                let mean = (zt - coeff * e) / mu;
                let noise: f64 = StandardNormal.sample(rng);
                mean + varsigma * noise
            })
            .collect();
    }
    Ok(z)
}

/// The analytically optimal denoiser for an empirical data distribution: the
/// posterior-mean noise estimate under the schedule's marginal at step `t`,
/// with kernel weights over the database.
pub struct KernelDenoiser<'a> {
    db: &'a VectorDb,
    sched: &'a DdpmSchedule,
}

impl<'a> KernelDenoiser<'a> {
    pub fn new(db: &'a VectorDb, sched: &'a DdpmSchedule) -> Self {
        Self { db, sched }
    }
}

impl Denoiser for KernelDenoiser<'_> {
    fn dim(&self) -> usize {
        self.db.dim()
    }

    fn predict_noise(&self, z: &[f64], t: usize) -> Vec<f64> {
        let scale = self.sched.marginal_scale(t);
        let var = self.sched.marginal_var(t);
        let d2s: Vec<f64> = self
            .db
            .entries()
            .iter()
            .map(|e| {
                e.iter()
                    .zip(z.iter())
                    .map(|(r, x)| {
                        let d = x - scale * r;
                        d * d
                    })
                    .sum()
            })
            .collect();
        let d2_min = d2s.iter().fold(f64::INFINITY, |a, &b| a.min(b));
        let mut wsum = 0.0;
        let mut mean = vec![0.0f64; self.db.dim()];
        for (e, &d2) in self.db.entries().iter().zip(d2s.iter()) {
            let w = (-(d2 - d2_min) / (2.0 * var)).exp();
            if w == 0.0 {
                continue;
            }
            wsum += w;
            for (m, r) in mean.iter_mut().zip(e.iter()) {
                *m += w * r;
            }
        }
        let std = var.sqrt();
        z.iter()
            .enumerate()
            .map(|(k, x)| (x - scale * mean[k] / wsum) / std)
            .collect()
    }
}

/// Predicts zero noise everywhere; the natural baseline for the loss contract.
pub struct ZeroDenoiser {
    pub dim: usize,
}

impl Denoiser for ZeroDenoiser {
    fn dim(&self) -> usize {
        self.dim
    }

    fn predict_noise(&self, z: &[f64], _t: usize) -> Vec<f64> {
        vec![0.0; z.len()]
    }
}
