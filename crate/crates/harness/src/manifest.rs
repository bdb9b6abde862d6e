use std::collections::BTreeMap;
use std::path::PathBuf;

use eegeval_core::montage::MontageSelection;
use eegeval_core::preprocess::PipelineSpec;
use eegeval_core::probe::ProbeConfig;
use eegeval_core::sampling::CvScheme;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;

pub const HARNESS_VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Everything needed to rerun an evaluation and check that it reproduces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub harness_version: String,
    pub config: RunConfig,
    /// SHA-256 of the config serialized as JSON.
    pub config_sha256: String,
    /// Directory relative input paths were resolved against.
    pub base_dir: PathBuf,
    /// Input path -> SHA-256.
    pub inputs: BTreeMap<String, String>,
    pub resolved: Resolved,
    pub runs: Vec<RunRecord>,
    /// Output path (relative to the output directory) -> SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub results_file: String,
    pub results_sha256: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

/// Defaults the config left implicit, as actually used.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub cv: CvScheme,
    pub fold_seed: u64,
    pub validation_fraction: f64,
    /// Validation epochs never count toward a sample budget.
    pub validation_in_budget: bool,
    pub probe: ProbeConfig,
    pub learning_rates: Vec<f64>,
    pub significance_test: String,
    /// The dataset preset's pipeline, if any.
    pub pipeline: Option<PipelineSpec>,
    /// Transforms recorded in the epoch store at ingest time.
    pub store_log: Vec<String>,
}

/// One fold x seed: who was trained, validated and tested on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub fold_id: usize,
    pub seed: u64,
    pub montage: String,
    pub selection: Option<MontageSelection>,
    pub train_subjects: Vec<String>,
    pub val_subjects: Vec<String>,
    pub test_subjects: Vec<String>,
    pub train_ids: Vec<u64>,
    pub val_ids: Vec<u64>,
    pub test_ids: Vec<u64>,
    /// Per model/setting notes (rejected prediction rows, chosen lr, ...).
    pub notes: Vec<String>,
}

pub fn config_hash(cfg: &RunConfig) -> String {
    sha256_hex(&serde_json::to_vec(cfg).expect("config serializes"))
}
