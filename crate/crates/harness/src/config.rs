//! Run configuration (TOML).
//!
//! ```toml
//! dataset_id = "sleep_edf"
//! epoch_store = "store/sleep_edf.epo"
//! seeds = [0, 1, 2]
//! metrics = ["bac", "kappa"]
//!
//! [budget]
//! s_total = 240
//! n_subjects = 4
//!
//! [montage]
//! sparse_n = 2
//!
//! [[models]]
//! tag = "bandpower"
//! setting = "linear_probe"
//! source = { builtin = "bandpower" }
//!
//! [[models]]
//! tag = "eegnet"
//! setting = "supervised"
//! source = { predictions = "preds/eegnet_fold{fold}_seed{seed}.csv" }
//! ```
//!
//! Relative paths resolve against the config file's directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use eegeval_core::efficiency::Setting;
use eegeval_core::metrics::Metric;
use eegeval_core::montage::{ChannelOverride, Region};
use eegeval_core::preprocess::{preset, PRESET_NAMES};
use eegeval_core::probe::ProbeConfig;
use eegeval_core::sampling::CvScheme;
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const DEFAULT_LRS: [f64; 2] = [1e-2, 1e-3];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset_id: String,
    pub epoch_store: PathBuf,
    pub seeds: Vec<u64>,
    /// Defaults to the dataset preset's scheme.
    #[serde(default)]
    pub cv: Option<CvScheme>,
    /// Seed for fold assignment and validation subjects, shared by every run
    /// seed so that seeds vary only training randomness.
    #[serde(default)]
    pub fold_seed: u64,
    #[serde(default = "all_metrics")]
    pub metrics: Vec<Metric>,
    #[serde(default)]
    pub budget: Option<BudgetConfig>,
    #[serde(default)]
    pub montage: Option<MontageConfig>,
    #[serde(default)]
    pub probe: ProbeConfig,
    /// Learning rates swept per probe; `probe.lr` is used when empty.
    #[serde(default = "default_lrs")]
    pub lrs: Vec<f64>,
    pub models: Vec<ModelConfig>,
}

fn all_metrics() -> Vec<Metric> {
    Metric::ALL.to_vec()
}

fn default_lrs() -> Vec<f64> {
    DEFAULT_LRS.to_vec()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    pub s_total: usize,
    pub n_subjects: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MontageConfig {
    /// Channels per lobe.
    #[serde(default)]
    pub sparse_n: Option<usize>,
    /// A lobe name or `midline`.
    #[serde(default)]
    pub region: Option<String>,
    #[serde(default)]
    pub overrides: BTreeMap<String, ChannelOverride>,
}

impl MontageConfig {
    pub fn region(&self) -> Result<Option<Region>> {
        self.region
            .as_deref()
            .map(|r| r.parse::<Region>().map_err(|e| HarnessError::Usage(e.to_string())))
            .transpose()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub tag: String,
    pub setting: Setting,
    pub source: Source,
}

/// Where a model's outputs come from. Path templates may use `{fold}`,
/// `{seed}`, `{budget}` and `{montage}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Source {
    /// Frozen embeddings for a linear probe trained by the harness.
    Embeddings(String),
    /// Features computed by the harness itself (`bandpower`).
    Builtin(String),
    /// Class probabilities from an external training run.
    Predictions(String),
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| HarnessError::Usage(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let usage = |m: String| Err(HarnessError::Usage(m));
        if self.dataset_id != "custom" && !PRESET_NAMES.contains(&self.dataset_id.as_str()) {
            return usage(format!("dataset_id `{}` is not a preset or `custom`", self.dataset_id));
        }
        if self.dataset_id == "custom" && self.cv.is_none() {
            return usage("a custom dataset needs an explicit cv scheme".into());
        }
        if self.seeds.is_empty() {
            return usage("seeds must not be empty".into());
        }
        if self.models.is_empty() {
            return usage("no models configured".into());
        }
        if self.metrics.is_empty() {
            return usage("metrics must not be empty".into());
        }
        let mut seen = std::collections::BTreeSet::new();
        for m in &self.models {
            if !seen.insert((m.tag.as_str(), m.setting)) {
                return usage(format!("model {} / {} configured twice", m.tag, m.setting));
            }
            match (&m.source, m.setting) {
                (Source::Embeddings(_) | Source::Builtin(_), s) if s != Setting::LinearProbe => {
                    return usage(format!(
                        "model {}: embeddings only feed the linear_probe setting",
                        m.tag
                    ));
                }
                (Source::Builtin(b), _) if b != crate::features::MODEL_TAG => {
                    return usage(format!("model {}: unknown builtin `{b}`", m.tag));
                }
                _ => {}
            }
        }
        if let Some(mc) = &self.montage {
            match (mc.sparse_n, mc.region()?) {
                (Some(_), Some(_)) => return usage("montage: give sparse_n or region, not both".into()),
                (None, None) => return usage("montage: give sparse_n or region".into()),
                (Some(0), _) => return usage("montage: sparse_n must be >= 1".into()),
                _ => {}
            }
        }
        if self.lrs.iter().any(|lr| lr.is_nan() || *lr <= 0.0) {
            return usage("probe learning rates must be positive".into());
        }
        Ok(())
    }

    pub fn cv_scheme(&self) -> CvScheme {
        self.cv
            .or_else(|| preset(&self.dataset_id).map(|p| p.cv))
            .expect("validated: preset or explicit cv")
    }

    /// Learning rates actually swept.
    pub fn learning_rates(&self) -> Vec<f64> {
        if self.lrs.is_empty() {
            vec![self.probe.lr]
        } else {
            self.lrs.clone()
        }
    }

    pub fn resolve(&self, path: &Path, base: &Path) -> PathBuf {
        if path.is_absolute() {
            path.to_path_buf()
        } else {
            base.join(path)
        }
    }
}

pub fn fill_template(template: &str, fold: usize, seed: u64, budget: Option<usize>, montage: &str) -> String {
    template
        .replace("{fold}", &fold.to_string())
        .replace("{seed}", &seed.to_string())
        .replace(
            "{budget}",
            &budget.map_or_else(|| "full".to_string(), |b| b.to_string()),
        )
        .replace("{montage}", montage)
}
