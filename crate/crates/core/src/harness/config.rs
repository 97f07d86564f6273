use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cohort::{io::read_cohort, CohortRecord, Race};
use crate::error::{Error, Result};
use crate::learners::{ForestConfig, ModelKind, DEFAULT_THRESHOLD};
use crate::synthcohort::{generate_cohort, SynthConfig};

categorical!(ExperimentKind {
    VaryRatio => "vary_ratio",
    Ablation => "ablation",
});

/// Where each seed's cohort comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CohortSource {
    /// A fresh synthetic cohort per seed, generated from the derived seed.
    Synthetic { config: SynthConfig },
    /// One labeled outcome cohort shared by all seeds.
    File { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub source: CohortSource,
    /// Training size for the ratio sweep.
    pub train_size: usize,
    pub na_ratios: Vec<f64>,
    /// Non-adherent share of the full training set in the ablation.
    pub ablation_ratio: f64,
    pub full_sizes: Vec<usize>,
    pub n_seeds: usize,
    pub base_seed: u64,
    pub test_size: usize,
    pub models: Vec<ModelKind>,
    pub forest: ForestConfig,
    pub fairness_groups: Vec<Race>,
    pub threshold: f64,
}

/// Synthetic cohort size per seed: a 500-record test set plus a 2,000-record training pool.
pub const DEFAULT_SYNTHETIC_N: usize = 2500;

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            source: CohortSource::Synthetic {
                config: SynthConfig {
                    n: DEFAULT_SYNTHETIC_N,
                    ..SynthConfig::default()
                },
            },
            train_size: 300,
            na_ratios: vec![0.0, 0.1, 0.3, 0.5, 0.7, 0.9],
            ablation_ratio: 0.25,
            full_sizes: vec![600, 800, 1000, 1200],
            n_seeds: 100,
            base_seed: 0,
            test_size: 500,
            models: vec![ModelKind::Logistic, ModelKind::Forest],
            forest: ForestConfig::default(),
            fairness_groups: vec![Race::Black],
            threshold: DEFAULT_THRESHOLD,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        if self.n_seeds == 0 {
            return fail("n_seeds must be at least 1".into());
        }
        if self.test_size == 0 || self.train_size == 0 {
            return fail("test_size and train_size must be positive".into());
        }
        if let Some(r) = self
            .na_ratios
            .iter()
            .chain(std::iter::once(&self.ablation_ratio))
            .find(|r| !(0.0..=1.0).contains(*r))
        {
            return fail(format!("ratio {r} outside [0, 1]"));
        }
        if self.models.is_empty() {
            return fail("at least one model is required".into());
        }
        if !(0.0..=1.0).contains(&self.threshold) {
            return fail(format!("threshold {} outside [0, 1]", self.threshold));
        }
        if let CohortSource::Synthetic { config } = &self.source {
            config.validate()?;
        }
        Ok(())
    }

    /// Reads TOML, or JSON when the extension is `.json`.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text)?
        } else {
            toml::from_str(&text).map_err(|e| Error::Config(e.to_string()))?
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// FNV-1a over the condition name and seed index.
fn fnv1a(condition: &str, seed_index: u64) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in condition.bytes().chain(seed_index.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Stream seed for one (condition, seed) cell: `base_seed XOR hash(condition, seed_index)`.
pub fn derive_seed(base_seed: u64, condition: &str, seed_index: u64) -> u64 {
    base_seed ^ fnv1a(condition, seed_index)
}

/// Cohorts resolved once per run.
pub(crate) enum PreparedSource {
    Synthetic(SynthConfig),
    Fixed(Vec<CohortRecord>),
}

impl PreparedSource {
    pub fn new(source: &CohortSource) -> Result<Self> {
        Ok(match source {
            CohortSource::Synthetic { config } => PreparedSource::Synthetic(config.clone()),
            CohortSource::File { path } => PreparedSource::Fixed(read_cohort(path, None)?),
        })
    }

    pub fn cohort(&self, base_seed: u64, seed_index: usize) -> Result<std::borrow::Cow<'_, [CohortRecord]>> {
        Ok(match self {
            PreparedSource::Synthetic(cfg) => {
                let mut c = cfg.clone();
                c.seed = derive_seed(base_seed, "cohort", seed_index as u64);
                std::borrow::Cow::Owned(generate_cohort(&c)?.0)
            }
            PreparedSource::Fixed(r) => std::borrow::Cow::Borrowed(r),
        })
    }
}
