//! Pipeline configuration: TOML-backed, fully defaulted, validated
//! before any command does work.

use std::path::Path;

use serde::{Deserialize, Serialize};
use ugae::codec::RateLevel;
use ugae::learner::WmseConfig;
use ugae::poae::PoaeTrainConfig;
use ugae::poge::PogeTrainConfig;

use crate::{cli_error, Category, CliResult, WithCategory};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Voxelization depth for prepared clouds.
    pub depth: u8,
    /// Maximum points per prepared sub-cloud.
    pub max_points: usize,
    /// Rate levels exercised by training and reporting.
    pub rates: Vec<String>,
    /// Neighbor count for distance-adaptive recoloring.
    pub recolor_k: usize,
    /// Base random seed for training.
    pub seed: u64,
    /// Weighted-MSE loss shape for attribute training.
    pub wmse: WmseSection,
    /// Occupancy-model training hyperparameters.
    pub poge: PogeSection,
    /// Attribute-model training hyperparameters.
    pub poae: PoaeSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WmseSection {
    pub w_high: f64,
    pub w_low: f64,
    pub q: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PogeSection {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_samples_per_pair: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PoaeSection {
    pub neighbors: usize,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_samples_per_pair: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            depth: 8,
            max_points: 100_000,
            rates: RateLevel::ALL.iter().map(|r| r.name().to_string()).collect(),
            recolor_k: ugae::pae::DEFAULT_RECOLOR_K,
            seed: 7,
            wmse: WmseSection::default(),
            poge: PogeSection::default(),
            poae: PoaeSection::default(),
        }
    }
}

impl Default for WmseSection {
    fn default() -> Self {
        let w = WmseConfig::default();
        WmseSection {
            w_high: w.w_high,
            w_low: w.w_low,
            q: w.q,
        }
    }
}

impl Default for PogeSection {
    fn default() -> Self {
        let c = PogeTrainConfig::default();
        PogeSection {
            hidden: c.hidden,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            max_samples_per_pair: c.max_samples_per_pair,
        }
    }
}

impl Default for PoaeSection {
    fn default() -> Self {
        let c = PoaeTrainConfig::default();
        PoaeSection {
            neighbors: c.neighbors,
            hidden: c.hidden,
            epochs: c.epochs,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            max_samples_per_pair: c.max_samples_per_pair,
        }
    }
}

impl PipelineConfig {
    /// Load from a TOML file, or start from defaults when no path is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| {
                        cli_error(Category::Io, format!("reading config {}: {e}", p.display()))
                    })?;
                toml::from_str(&text).map_err(|e| {
                    cli_error(
                        Category::Config,
                        format!("parsing config {}: {e}", p.display()),
                    )
                })
            }
        }
    }

    /// Reject impossible settings before any command starts real work.
    pub fn validate(&self) -> CliResult {
        if self.depth == 0 || self.depth > ugae::cloud::MAX_DEPTH {
            return Err(cli_error(
                Category::Config,
                format!(
                    "depth must be in 1..={}, got {}",
                    ugae::cloud::MAX_DEPTH,
                    self.depth
                ),
            ));
        }
        if self.max_points == 0 {
            return Err(cli_error(Category::Config, "max_points must be positive"));
        }
        if self.rates.is_empty() {
            return Err(cli_error(Category::Config, "rates must not be empty"));
        }
        let mut seen = Vec::new();
        for r in &self.rates {
            let level: RateLevel = r
                .parse()
                .map_err(|e| cli_error(Category::Config, format!("rate level {r:?}: {e}")))?;
            if seen.contains(&level) {
                return Err(cli_error(
                    Category::Config,
                    format!("duplicate rate level {r}"),
                ));
            }
            seen.push(level);
        }
        if self.recolor_k == 0 {
            return Err(cli_error(Category::Config, "recolor_k must be positive"));
        }
        self.wmse_config()
            .validate()
            .category(Category::Config)?;
        for (stage, epochs, batch, cap, lr) in [
            (
                "poge",
                self.poge.epochs,
                self.poge.batch_size,
                self.poge.max_samples_per_pair,
                self.poge.learning_rate,
            ),
            (
                "poae",
                self.poae.epochs,
                self.poae.batch_size,
                self.poae.max_samples_per_pair,
                self.poae.learning_rate,
            ),
        ] {
            if epochs == 0 {
                return Err(cli_error(
                    Category::Config,
                    format!("{stage}.epochs must be positive"),
                ));
            }
            if batch == 0 {
                return Err(cli_error(
                    Category::Config,
                    format!("{stage}.batch_size must be positive"),
                ));
            }
            if cap < 2 {
                return Err(cli_error(
                    Category::Config,
                    format!("{stage}.max_samples_per_pair must be at least 2"),
                ));
            }
            if !(lr.is_finite() && lr > 0.0) {
                return Err(cli_error(
                    Category::Config,
                    format!("{stage}.learning_rate must be positive and finite"),
                ));
            }
        }
        if self.poae.neighbors == 0 {
            return Err(cli_error(
                Category::Config,
                "poae.neighbors must be positive",
            ));
        }
        Ok(())
    }

    pub fn rate_levels(&self) -> Vec<RateLevel> {
        self.rates
            .iter()
            .map(|r| r.parse().expect("rates validated"))
            .collect()
    }

    pub fn wmse_config(&self) -> WmseConfig {
        WmseConfig {
            w_high: self.wmse.w_high,
            w_low: self.wmse.w_low,
            q: self.wmse.q,
        }
    }

    pub fn poge_config(&self) -> PogeTrainConfig {
        PogeTrainConfig {
            hidden: self.poge.hidden.clone(),
            epochs: self.poge.epochs,
            learning_rate: self.poge.learning_rate,
            batch_size: self.poge.batch_size,
            max_samples_per_pair: self.poge.max_samples_per_pair,
            seed: self.seed,
        }
    }

    pub fn poae_config(&self) -> PoaeTrainConfig {
        PoaeTrainConfig {
            neighbors: self.poae.neighbors,
            hidden: self.poae.hidden.clone(),
            epochs: self.poae.epochs,
            learning_rate: self.poae.learning_rate,
            batch_size: self.poae.batch_size,
            max_samples_per_pair: self.poae.max_samples_per_pair,
            wmse: self.wmse_config(),
            seed: self.seed,
        }
    }

    /// Full configuration snapshot for run manifests.
    pub fn snapshot(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config serializes")
    }
}
