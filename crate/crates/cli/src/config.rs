//! Flat key-value run configuration: `key = value` lines, `#` comments.
//! Unknown keys are rejected; the effective configuration is echoed into
//! every output file.

use std::collections::BTreeMap;
use std::path::Path;

use symcloud_core::detect::{DensityParams, DetectConfig};
use symcloud_core::sampler::{LangevinConfig, NoiseSchedule};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    /// 0 selects the automatic budget `min(50_000, n^2 / 2)`.
    pub vote_budget: usize,
    pub bandwidth: f64,
    /// 0 selects a third of the bandwidth.
    pub refine_bandwidth: f64,
    pub top_k: usize,
    pub ms_max_iter: usize,
    pub ms_tol: f64,
    pub mode_merge_radius: f64,
    pub coverage_tol: f64,
    pub max_group_order: usize,
    pub langevin_tau: usize,
    pub langevin_steps: usize,
    pub gamma_min: f64,
    pub gamma_max: f64,
    pub emd_cap: usize,
    pub emd_approx: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            vote_budget: 0,
            bandwidth: symcloud_core::detect::DEFAULT_BANDWIDTH,
            refine_bandwidth: 0.0,
            top_k: symcloud_core::detect::DEFAULT_TOP_K,
            ms_max_iter: symcloud_core::detect::DEFAULT_MAX_ITER,
            ms_tol: symcloud_core::detect::DEFAULT_MS_TOL,
            mode_merge_radius: symcloud_core::detect::MODE_MERGE_RADIUS,
            coverage_tol: symcloud_core::symgroup::DEFAULT_COVERAGE_TOL,
            max_group_order: symcloud_core::symgroup::DEFAULT_MAX_ORDER,
            langevin_tau: symcloud_core::sampler::DEFAULT_TAU,
            langevin_steps: symcloud_core::sampler::DEFAULT_INNER_STEPS,
            gamma_min: symcloud_core::sampler::DEFAULT_GAMMA_MIN,
            gamma_max: symcloud_core::sampler::DEFAULT_GAMMA_MAX,
            emd_cap: symcloud_core::metrics::EMD_EXACT_CAP,
            emd_approx: false,
        }
    }
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::new(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut cfg = Self::default();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::new(format!(
                    "config line {}: expected `key = value`, got {raw:?}",
                    lineno + 1
                )));
            };
            cfg.set(key.trim(), value.trim())
                .map_err(|e| CliError::new(format!("config line {}: {e}", lineno + 1)))?;
        }
        Ok(cfg)
    }

    fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
            value
                .parse()
                .map_err(|_| CliError::new(format!("bad value for {key}: {value:?}")))
        }
        match key {
            "seed" => self.seed = num(key, value)?,
            "vote_budget" => self.vote_budget = num(key, value)?,
            "bandwidth" => self.bandwidth = num(key, value)?,
            "refine_bandwidth" => self.refine_bandwidth = num(key, value)?,
            "top_k" => self.top_k = num(key, value)?,
            "ms_max_iter" => self.ms_max_iter = num(key, value)?,
            "ms_tol" => self.ms_tol = num(key, value)?,
            "mode_merge_radius" => self.mode_merge_radius = num(key, value)?,
            "coverage_tol" => self.coverage_tol = num(key, value)?,
            "max_group_order" => self.max_group_order = num(key, value)?,
            "langevin_tau" => self.langevin_tau = num(key, value)?,
            "langevin_steps" => self.langevin_steps = num(key, value)?,
            "gamma_min" => self.gamma_min = num(key, value)?,
            "gamma_max" => self.gamma_max = num(key, value)?,
            "emd_cap" => self.emd_cap = num(key, value)?,
            "emd_approx" => self.emd_approx = num(key, value)?,
            other => return Err(CliError::new(format!("unknown config key {other:?}"))),
        }
        Ok(())
    }

    /// Ordered key-value view echoed into output metadata.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut m = BTreeMap::new();
        m.insert("seed".into(), self.seed.to_string());
        m.insert("vote_budget".into(), self.vote_budget.to_string());
        m.insert("bandwidth".into(), self.bandwidth.to_string());
        m.insert("refine_bandwidth".into(), self.refine_bandwidth.to_string());
        m.insert("top_k".into(), self.top_k.to_string());
        m.insert("ms_max_iter".into(), self.ms_max_iter.to_string());
        m.insert("ms_tol".into(), self.ms_tol.to_string());
        m.insert("mode_merge_radius".into(), self.mode_merge_radius.to_string());
        m.insert("coverage_tol".into(), self.coverage_tol.to_string());
        m.insert("max_group_order".into(), self.max_group_order.to_string());
        m.insert("langevin_tau".into(), self.langevin_tau.to_string());
        m.insert("langevin_steps".into(), self.langevin_steps.to_string());
        m.insert("gamma_min".into(), self.gamma_min.to_string());
        m.insert("gamma_max".into(), self.gamma_max.to_string());
        m.insert("emd_cap".into(), self.emd_cap.to_string());
        m.insert("emd_approx".into(), self.emd_approx.to_string());
        m
    }

    pub fn detect_config(&self, seed: u64) -> DetectConfig {
        DetectConfig {
            seed,
            vote_budget: (self.vote_budget > 0).then_some(self.vote_budget),
            density: DensityParams {
                bandwidth: self.bandwidth,
                radius: None,
            },
            top_k: self.top_k,
            ms_max_iter: self.ms_max_iter,
            ms_tol: self.ms_tol,
            mode_merge_radius: self.mode_merge_radius,
            refine_bandwidth: (self.refine_bandwidth > 0.0).then_some(self.refine_bandwidth),
            coverage_tol: self.coverage_tol,
            max_order: self.max_group_order,
        }
    }

    pub fn noise_schedule(&self) -> Result<NoiseSchedule, CliError> {
        NoiseSchedule::geometric(self.langevin_tau, self.gamma_min, self.gamma_max)
            .map_err(|e| CliError::new(e.to_string()))
    }

    pub fn langevin_config(&self) -> Result<LangevinConfig, CliError> {
        LangevinConfig::new(self.langevin_steps).map_err(|e| CliError::new(e.to_string()))
    }

    pub fn metric_options(&self) -> symcloud_core::metrics::MetricOptions {
        symcloud_core::metrics::MetricOptions {
            emd_cap: self.emd_cap,
            emd_approx: self.emd_approx,
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_known_keys_and_comments() {
        let cfg = RunConfig::parse("# comment\nseed = 7\nbandwidth = 0.1 # inline\n\n").unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!(cfg.bandwidth, 0.1);
        assert_eq!(cfg.top_k, RunConfig::default().top_k);
    }

    #[test]
    fn rejects_unknown_keys() {
        let err = RunConfig::parse("bogus = 1\n").unwrap_err();
        assert!(err.to_string().contains("unknown config key"), "{err}");
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::parse("seed = x\n").is_err());
        assert!(RunConfig::parse("seed 7\n").is_err());
    }

    #[test]
    fn map_round_trips_through_parse() {
        let cfg = RunConfig {
            seed: 99,
            emd_approx: true,
            gamma_min: 0.005,
            ..RunConfig::default()
        };
        let text: String = cfg
            .to_map()
            .iter()
            .map(|(k, v)| format!("{k} = {v}\n"))
            .collect();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(cfg, back);
    }
}
