//! TOML experiment configuration. Every section and key is optional; missing
//! values take the defaults below, unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::allocator::RadioParams;
use crate::channel::{dbm_to_watts, Fading, PathLoss};
use crate::dataset::DatasetFormat;
use crate::delay::DelayConstraint;
use crate::error::{Error, Result};
use crate::features::{sha256_hex, ScaleRule};
use crate::model::TrainConfig;
use crate::pipeline::PrepareOptions;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
/// Environment variable that overrides the default output directory.
pub const OUT_DIR_ENV: &str = "EDGECAST_OUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub path: PathBuf,
    pub format: DatasetFormat,
    pub like_threshold: u8,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    pub scale_rule: ScaleRule,
    pub split_seed: u64,
}

impl Default for DataConfig {
    fn default() -> Self {
        let p = PrepareOptions::default();
        DataConfig {
            path: PathBuf::from("data/ml-100k"),
            format: DatasetFormat::Ml100k,
            like_threshold: p.like_threshold,
            train_fraction: p.train_fraction,
            validation_fraction: p.validation_fraction,
            scale_rule: p.scale_rule,
            split_seed: p.seed,
        }
    }
}

impl DataConfig {
    pub fn prepare_options(&self, new_per_user: usize) -> PrepareOptions {
        PrepareOptions {
            like_threshold: self.like_threshold,
            train_fraction: self.train_fraction,
            validation_fraction: self.validation_fraction,
            new_per_user,
            scale_rule: self.scale_rule,
            seed: self.split_seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChannelConfig {
    pub bandwidth_hz: f64,
    pub noise_dbm_per_hz: f64,
    pub block_s: f64,
    pub power_dbm: f64,
    pub distance_min_m: f64,
    pub distance_max_m: f64,
    pub reference_loss_db: f64,
    pub path_loss_exponent: f64,
    pub fading: Fading,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        ChannelConfig {
            bandwidth_hz: 50e6,
            noise_dbm_per_hz: -130.0,
            block_s: 0.1,
            power_dbm: 100.0,
            distance_min_m: 15.0,
            distance_max_m: 20.0,
            reference_loss_db: 30.0,
            path_loss_exponent: 2.0,
            fading: Fading::Rayleigh,
        }
    }
}

impl ChannelConfig {
    pub fn radio(&self) -> RadioParams {
        RadioParams {
            noise_psd: dbm_to_watts(self.noise_dbm_per_hz),
            block_s: self.block_s,
            path_loss: PathLoss {
                reference_loss_db: self.reference_loss_db,
                exponent: self.path_loss_exponent,
            },
            fading: self.fading,
        }
    }

    pub fn power_w(&self) -> f64 {
        dbm_to_watts(self.power_dbm)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelayConfig {
    pub target_s: f64,
    pub violation_prob: f64,
    pub cloud_delay_s: f64,
}

impl Default for DelayConfig {
    fn default() -> Self {
        DelayConfig {
            target_s: 0.2,
            violation_prob: 1e-3,
            cloud_delay_s: 0.1,
        }
    }
}

impl DelayConfig {
    pub fn constraint(&self, cached: bool) -> DelayConstraint {
        DelayConstraint::new(self.target_s, self.violation_prob, self.cloud_delay_s, cached)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CacheConfig {
    /// Cache capacity `E` used by the delivery experiments.
    pub capacity: usize,
    pub delta: f64,
    /// Unwatched candidates sampled per user, as a multiple of `E`.
    pub new_multiplier: usize,
    pub watched_interest: WatchedInterest,
}

/// Interest assigned to a (user, video) pair already in the user's history
/// when scoring cache candidates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WatchedInterest {
    /// The model's prediction, as for any other pair.
    #[default]
    Predict,
    Zero,
}

impl Default for CacheConfig {
    fn default() -> Self {
        CacheConfig {
            capacity: 100,
            delta: 0.5,
            new_multiplier: 3,
            watched_interest: WatchedInterest::Predict,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocatorConfig {
    pub rate_tol: f64,
    pub band_tol: f64,
}

impl Default for AllocatorConfig {
    fn default() -> Self {
        AllocatorConfig {
            rate_tol: 1e3,
            band_tol: 1e2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    pub blocks: usize,
    pub warmup: usize,
    /// Link bandwidth of the single-link rate and bound sweeps.
    pub bandwidth_hz: f64,
    pub distance_m: f64,
    pub targets_s: Vec<f64>,
    pub violation_probs: Vec<f64>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig {
            blocks: 1_000_000,
            warmup: 10_000,
            bandwidth_hz: 0.5e6,
            distance_m: 20.0,
            targets_s: vec![0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 5.0, 10.0],
            violation_probs: vec![1e-4, 1e-3, 1e-2, 1e-1],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    pub seeds: Vec<u64>,
    pub users: Vec<usize>,
    pub capacities: Vec<usize>,
    /// Cell size of the content hit rate comparison.
    pub chr_users: usize,
}

impl Default for ExperimentSection {
    fn default() -> Self {
        ExperimentSection {
            seeds: (0..10).collect(),
            users: vec![50, 100, 300],
            capacities: vec![30, 60, 100],
            chr_users: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: DataConfig,
    pub model: TrainConfig,
    pub channel: ChannelConfig,
    pub delay: DelayConfig,
    pub cache: CacheConfig,
    pub allocator: AllocatorConfig,
    pub simulation: SimulationConfig,
    pub experiment: ExperimentSection,
}

fn check(ok: bool, field: &str, msg: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::config(field, msg))
    }
}

fn positive(v: f64) -> bool {
    v > 0.0 && v.is_finite()
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
            let field = e.span().map_or("<root>".to_string(), |s| format!("at bytes {}..{}", s.start, s.end));
            Error::config(field, e.message().to_string())
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let p = &self.data;
        check((1..=5).contains(&p.like_threshold), "data.like_threshold", "must be in 1..=5")?;
        check(p.train_fraction > 0.0 && p.train_fraction < 1.0, "data.train_fraction", "must be in (0,1)")?;
        check(
            p.validation_fraction > 0.0 && p.validation_fraction < 1.0,
            "data.validation_fraction",
            "must be in (0,1)",
        )?;
        self.model.validate()?;
        let c = &self.channel;
        check(positive(c.bandwidth_hz), "channel.bandwidth_hz", "must be positive")?;
        check(positive(c.block_s), "channel.block_s", "must be positive")?;
        check(c.noise_dbm_per_hz.is_finite(), "channel.noise_dbm_per_hz", "must be finite")?;
        check(c.power_dbm.is_finite(), "channel.power_dbm", "must be finite")?;
        check(
            c.distance_min_m >= 1.0 && c.distance_max_m >= c.distance_min_m && c.distance_max_m.is_finite(),
            "channel.distance_min_m",
            "need 1 <= distance_min_m <= distance_max_m",
        )?;
        check(positive(c.path_loss_exponent), "channel.path_loss_exponent", "must be positive")?;
        let d = &self.delay;
        check(
            d.violation_prob > 0.0 && d.violation_prob < 1.0,
            "delay.violation_prob",
            "must be in (0,1)",
        )?;
        check(positive(d.target_s), "delay.target_s", "must be positive")?;
        check(d.cloud_delay_s >= 0.0, "delay.cloud_delay_s", "must be non-negative")?;
        for cached in [true, false] {
            d.constraint(cached)
                .effective_budget(c.block_s)
                .map_err(|e| Error::config("delay.target_s", e.to_string()))?;
        }
        check(self.cache.capacity >= 1, "cache.capacity", "must be at least 1")?;
        check(self.cache.delta > 0.0 && self.cache.delta < 1.0, "cache.delta", "must be in (0,1)")?;
        check(self.cache.new_multiplier >= 1, "cache.new_multiplier", "must be at least 1")?;
        check(positive(self.allocator.rate_tol), "allocator.rate_tol", "must be positive")?;
        check(positive(self.allocator.band_tol), "allocator.band_tol", "must be positive")?;
        let s = &self.simulation;
        check(s.blocks > s.warmup, "simulation.blocks", "must exceed simulation.warmup")?;
        check(positive(s.bandwidth_hz), "simulation.bandwidth_hz", "must be positive")?;
        check(s.distance_m >= 1.0, "simulation.distance_m", "must be at least 1")?;
        check(s.targets_s.iter().all(|&t| positive(t)), "simulation.targets_s", "must be positive")?;
        check(
            s.violation_probs.iter().all(|&e| e > 0.0 && e < 1.0),
            "simulation.violation_probs",
            "must be in (0,1)",
        )?;
        let e = &self.experiment;
        check(!e.seeds.is_empty(), "experiment.seeds", "must not be empty")?;
        check(!e.users.is_empty() && !e.users.contains(&0), "experiment.users", "must be positive")?;
        check(
            !e.capacities.is_empty() && !e.capacities.contains(&0),
            "experiment.capacities",
            "must be positive",
        )?;
        check(e.chr_users >= 1, "experiment.chr_users", "must be positive")?;
        Ok(())
    }

    /// Canonical TOML re-serialization of the effective config.
    pub fn canonical(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(&self.canonical())
    }

    /// First line of every output file.
    /// `seed` is the seed, a `;`-joined seed list, or `-` when unseeded.
    pub fn header(&self, seed: &str) -> String {
        format!("# edgecast v{VERSION} config={} seed={seed}\n", self.hash())
    }
}

/// `--out` if given, else `$EDGECAST_OUT_DIR`, else `out`.
pub fn output_dir(cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"))
}
