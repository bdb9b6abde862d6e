//! The evaluate pipeline: folds x seeds x models -> scored cells, plus a
//! manifest from which the run can be replayed.

use std::collections::{BTreeMap, HashMap};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use eegeval_core::efficiency::CellResult;
use eegeval_core::metrics::score;
use eegeval_core::montage::{self, classify_channels_with, select_lobe_restricted, select_sparse, MontageSelection};
use eegeval_core::preprocess::preset;
use eegeval_core::preprocess::EpochSet;
use eegeval_core::probe::{predict_proba, train_probe_sweep, EmbeddingSet, ProbeConfig, ProbeModel};
use eegeval_core::rng::derive_seed;
use eegeval_core::sampling::{
    make_folds, sample_budget, with_validation, BudgetSpec, FoldSpec, SamplingError, VALIDATION_FRACTION,
};
use log::{info, warn};

use crate::config::{fill_template, MontageConfig, RunConfig, Source};
use crate::emb1;
use crate::error::{read_file, write_file, HarnessError, Result};
use crate::features;
use crate::manifest::{config_hash, sha256_hex, Resolved, RunManifest, RunRecord, HARNESS_VERSION};
use crate::predictions::{self, PredictionRow};
use crate::results;
use crate::store;

pub const RESULTS_FILE: &str = "results.csv";
pub const MANIFEST_FILE: &str = "manifest.json";
const SIGNIFICANCE_TEST: &str = "one-sided exact sign test below 10 non-zero pairs, Wilcoxon signed-rank otherwise";

// Stream ids for derived seeds.
const STREAM_MONTAGE: u64 = 1;
const STREAM_BUDGET: u64 = 2;
const STREAM_PROBE: u64 = 3;

fn now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs())
}

/// Folds with validation subjects; folds whose training side has a single
/// subject keep an empty validation set.
pub fn folds_for(set: &EpochSet, cfg: &RunConfig) -> Result<Vec<FoldSpec>> {
    let subjects = set.subjects();
    make_folds(&subjects, cfg.cv_scheme(), cfg.fold_seed)?
        .iter()
        .map(|f| match with_validation(f, cfg.fold_seed) {
            Err(SamplingError::TooFewSubjects { .. }) => Ok(f.clone()),
            other => other.map_err(HarnessError::from),
        })
        .collect()
}

pub fn select_montage(set: &EpochSet, mc: &MontageConfig, seed: u64) -> Result<MontageSelection> {
    let tax = classify_channels_with(&set.channels, &mc.overrides);
    if !tax.unknown.is_empty() {
        info!("channels outside the lobe taxonomy: {}", tax.unknown.join(", "));
    }
    let sel = match (mc.sparse_n, mc.region()?) {
        (Some(n), _) => select_sparse(&tax, n, derive_seed(seed, &[STREAM_MONTAGE]))?,
        (None, Some(r)) => select_lobe_restricted(&tax, r)?,
        (None, None) => return Err(HarnessError::Usage("montage: give sparse_n or region".into())),
    };
    Ok(sel)
}

/// Frozen features for every epoch of a set, looked up by epoch id.
pub struct FeatureTable {
    set: EmbeddingSet,
    row_of: HashMap<u64, usize>,
}

impl FeatureTable {
    pub fn new(set: EmbeddingSet) -> Self {
        let row_of = set.epoch_ids.iter().enumerate().map(|(i, id)| (*id, i)).collect();
        FeatureTable { set, row_of }
    }

    pub fn rows(&self, ids: &[u64], what: &str) -> Result<EmbeddingSet> {
        let missing: Vec<String> = ids
            .iter()
            .filter(|id| !self.row_of.contains_key(id))
            .map(u64::to_string)
            .collect();
        if !missing.is_empty() {
            return Err(HarnessError::Data(format!(
                "{what}: no embedding for epochs [{}]",
                missing.into_iter().take(10).collect::<Vec<_>>().join(", ")
            )));
        }
        Ok(self
            .set
            .select(&ids.iter().map(|id| self.row_of[id]).collect::<Vec<_>>()))
    }
}

/// Load an EMB1 file as features for `set`, taking labels from the store.
pub fn load_embeddings(path: &Path, set: &EpochSet, selection: Option<&MontageSelection>) -> Result<EmbeddingSet> {
    let (emb, meta) = emb1::read(path)?;
    let ctx = |m: String| HarnessError::Data(format!("{}: {m}", path.display()));
    if emb.n_classes != set.n_classes() {
        return Err(ctx(format!(
            "K = {} but the epoch store has {} classes",
            emb.n_classes,
            set.n_classes()
        )));
    }
    if let (Some(channels), Some(sel)) = (&meta.channels, selection) {
        if *channels != sel.selected {
            return Err(ctx(format!(
                "embeddings were exported from channels [{}], the montage selects [{}]",
                channels.join(", "),
                sel.selected.join(", ")
            )));
        }
    }
    let labels: HashMap<u64, usize> = set.epochs.iter().map(|e| (e.id, e.label)).collect();
    let mut out = EmbeddingSet {
        features: Vec::with_capacity(emb.records.len() * emb.d),
        n: 0,
        d: emb.d,
        n_classes: emb.n_classes,
        labels: Vec::new(),
        subject_ids: Vec::new(),
        epoch_ids: Vec::new(),
        model_tag: meta.model_tag.clone(),
    };
    for (r, subject) in emb.records.iter().zip(&meta.subject_ids) {
        let Some(&label) = labels.get(&r.epoch_id) else {
            continue;
        };
        if r.label.is_some_and(|l| l != label) {
            return Err(ctx(format!(
                "epoch {} labeled {:?}, store says {label}",
                r.epoch_id, r.label
            )));
        }
        out.features.extend(r.features.iter().map(|&f| f as f64));
        out.labels.push(label);
        out.subject_ids.push(subject.clone());
        out.epoch_ids.push(r.epoch_id);
        out.n += 1;
    }
    Ok(out)
}

pub fn ids_of(set: &EpochSet, subjects: &[String]) -> Vec<u64> {
    set.epochs
        .iter()
        .filter(|e| subjects.contains(&e.subject_id))
        .map(|e| e.id)
        .collect()
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    base: &'a Path,
    out_dir: &'a Path,
    inputs: BTreeMap<String, String>,
    outputs: BTreeMap<String, String>,
    emb_cache: HashMap<PathBuf, FeatureTable>,
}

impl Ctx<'_> {
    fn input(&mut self, template: &str, fold: usize, seed: u64, montage: &str) -> Result<(PathBuf, Vec<u8>)> {
        let rel = fill_template(template, fold, seed, self.cfg.budget.map(|b| b.s_total), montage);
        let path = self.cfg.resolve(Path::new(&rel), self.base);
        let bytes = read_file(&path)?;
        self.inputs.insert(rel, sha256_hex(&bytes));
        Ok((path, bytes))
    }

    fn output(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_file(&self.out_dir.join(rel), bytes)?;
        self.outputs.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }
}

/// Run every fold x seed x model of `cfg`, writing predictions, the results
/// table and the manifest under `out_dir`.
pub fn evaluate(cfg: &RunConfig, base: &Path, out_dir: &Path) -> Result<RunManifest> {
    cfg.validate()?;
    let started = now();
    let mut ctx = Ctx {
        cfg,
        base,
        out_dir,
        inputs: BTreeMap::new(),
        outputs: BTreeMap::new(),
        emb_cache: HashMap::new(),
    };

    let store_path = cfg.resolve(&cfg.epoch_store, base);
    let store_bytes = read_file(&store_path)?;
    ctx.inputs
        .insert(cfg.epoch_store.display().to_string(), sha256_hex(&store_bytes));
    let (full_set, store_meta) = store::decode(&store_bytes).map_err(|e| e.context(store_path.display()))?;
    if cfg.dataset_id != "custom" && full_set.dataset_id != cfg.dataset_id {
        return Err(HarnessError::Data(format!(
            "epoch store holds `{}`, config says `{}`",
            full_set.dataset_id, cfg.dataset_id
        )));
    }
    let k = full_set.n_classes();
    let folds = folds_for(&full_set, cfg)?;
    let lrs = cfg.learning_rates();

    let mut cells = Vec::new();
    let mut runs = Vec::new();
    for &seed in &cfg.seeds {
        let selection = cfg
            .montage
            .as_ref()
            .map(|mc| select_montage(&full_set, mc, seed))
            .transpose()?;
        let (set, montage_tag) = match &selection {
            Some(sel) => (montage::apply(sel, &full_set)?, sel.mode.tag()),
            None => (full_set.clone(), "full".to_string()),
        };
        let builtin = cfg
            .models
            .iter()
            .any(|m| matches!(m.source, Source::Builtin(_)))
            .then(|| FeatureTable::new(features::band_power(&set)));

        for fold in &folds {
            let train_ids = match cfg.budget {
                Some(b) => {
                    let spec = BudgetSpec {
                        s_total: b.s_total,
                        n_subjects: b.n_subjects,
                        seed: derive_seed(seed, &[STREAM_BUDGET, fold.fold_id as u64]),
                    };
                    let sampled = sample_budget(&set, &spec, &fold.train_subjects)
                        .map_err(|e| HarnessError::from(e).context(format!("fold {}", fold.fold_id)))?;
                    sampled.epochs.iter().map(|e| e.id).collect()
                }
                None => ids_of(&set, &fold.train_subjects),
            };
            let val_ids = ids_of(&set, &fold.val_subjects);
            let test_ids = ids_of(&set, &fold.test_subjects);
            let mut record = RunRecord {
                fold_id: fold.fold_id,
                seed,
                montage: montage_tag.clone(),
                selection: selection.clone(),
                train_subjects: fold.train_subjects.clone(),
                val_subjects: fold.val_subjects.clone(),
                test_subjects: fold.test_subjects.clone(),
                train_ids,
                val_ids,
                test_ids,
                notes: Vec::new(),
            };

            for model in &cfg.models {
                let what = format!("{} / {} fold {} seed {seed}", model.tag, model.setting, fold.fold_id);
                let (truth, probs) = match &model.source {
                    Source::Predictions(template) => {
                        let (path, bytes) = ctx.input(template, fold.fold_id, seed, &montage_tag)?;
                        external_predictions(&path, &bytes, &set, &record.test_ids, &mut record.notes, &what)?
                    }
                    source => {
                        let table = match source {
                            Source::Builtin(_) => builtin.as_ref().expect("computed when configured"),
                            Source::Embeddings(template) => {
                                let (path, _) = ctx.input(template, fold.fold_id, seed, &montage_tag)?;
                                if !ctx.emb_cache.contains_key(&path) {
                                    let t = FeatureTable::new(load_embeddings(&path, &full_set, selection.as_ref())?);
                                    ctx.emb_cache.insert(path.clone(), t);
                                }
                                &ctx.emb_cache[&path]
                            }
                            Source::Predictions(_) => unreachable!(),
                        };
                        let train = table.rows(&record.train_ids, &what)?;
                        let val = table.rows(&record.val_ids, &what)?;
                        let test = table.rows(&record.test_ids, &what)?;
                        let pcfg = ProbeConfig {
                            seed: derive_seed(seed, &[STREAM_PROBE, fold.fold_id as u64]),
                            ..cfg.probe.clone()
                        };
                        let (model_fit, rows) =
                            fit_and_predict(&train, &val, &test, &pcfg, &lrs).map_err(|e| e.context(&what))?;
                        record.notes.push(format!(
                            "{what}: lr {} best epoch {}",
                            model_fit.lr, model_fit.best_epoch
                        ));
                        let probs: Vec<Vec<f64>> = rows.iter().map(|r| r.probs.clone()).collect();
                        let mut buf = Vec::new();
                        predictions::write(&mut buf, k, &rows)?;
                        let rel = format!(
                            "predictions/{}_{}_{}_fold{}_seed{seed}.csv",
                            model.tag,
                            model.setting,
                            montage_tag.replace(':', "-"),
                            fold.fold_id
                        );
                        ctx.output(&rel, &buf)?;
                        (test.labels, probs)
                    }
                };
                if truth.is_empty() {
                    return Err(HarnessError::Data(format!("{what}: empty test set")));
                }
                let report = score(&truth, &probs, k).map_err(|e| HarnessError::from(e).context(&what))?;
                for &metric in &cfg.metrics {
                    let Some(value) = report.get(metric) else { continue };
                    cells.push(CellResult {
                        model_tag: model.tag.clone(),
                        setting: model.setting,
                        dataset_id: full_set.dataset_id.clone(),
                        budget: cfg.budget.map(|b| b.s_total),
                        montage: montage_tag.clone(),
                        fold_id: fold.fold_id,
                        seed,
                        metric,
                        n_classes: k,
                        value,
                    });
                }
            }
            runs.push(record);
        }
    }

    let mut buf = Vec::new();
    results::write(&mut buf, &cells)?;
    ctx.output(RESULTS_FILE, &buf)?;
    let results_sha256 = sha256_hex(&buf);
    info!(
        "{} result rows -> {}",
        cells.len(),
        out_dir.join(RESULTS_FILE).display()
    );

    let manifest = RunManifest {
        harness_version: HARNESS_VERSION.into(),
        config: cfg.clone(),
        config_sha256: config_hash(cfg),
        base_dir: base.to_path_buf(),
        inputs: ctx.inputs,
        resolved: Resolved {
            cv: cfg.cv_scheme(),
            fold_seed: cfg.fold_seed,
            validation_fraction: VALIDATION_FRACTION,
            validation_in_budget: false,
            probe: cfg.probe.clone(),
            learning_rates: lrs,
            significance_test: SIGNIFICANCE_TEST.into(),
            pipeline: preset(&cfg.dataset_id).map(|p| p.pipeline),
            store_log: store_meta.log,
        },
        runs,
        outputs: ctx.outputs,
        results_file: RESULTS_FILE.into(),
        results_sha256,
        started_unix_s: started,
        finished_unix_s: now(),
    };
    let mut json = serde_json::to_vec_pretty(&manifest)?;
    json.push(b'\n');
    write_file(&out_dir.join(MANIFEST_FILE), &json)?;
    Ok(manifest)
}

/// Train a probe (sweeping `lrs`) and predict the test rows.
pub fn fit_and_predict(
    train: &EmbeddingSet,
    val: &EmbeddingSet,
    test: &EmbeddingSet,
    cfg: &ProbeConfig,
    lrs: &[f64],
) -> Result<(ProbeModel, Vec<PredictionRow>)> {
    let model = train_probe_sweep(train, val, cfg, lrs)?;
    let probs = predict_proba(&model, &test.features, test.d)?;
    let rows = test
        .epoch_ids
        .iter()
        .zip(&test.labels)
        .zip(probs)
        .map(|((&epoch_id, &true_label), probs)| PredictionRow {
            epoch_id,
            true_label,
            probs,
        })
        .collect();
    Ok((model, rows))
}

/// Read an external predictions file and line it up with the fold's test
/// epochs.
fn external_predictions(
    path: &Path,
    bytes: &[u8],
    set: &EpochSet,
    test_ids: &[u64],
    notes: &mut Vec<String>,
    what: &str,
) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let preds = predictions::parse(bytes).map_err(|e| e.context(path.display()))?;
    if preds.n_classes != set.n_classes() {
        return Err(HarnessError::Data(format!(
            "{}: K = {} but the epoch store has {} classes",
            path.display(),
            preds.n_classes,
            set.n_classes()
        )));
    }
    if !preds.rejected.is_empty() {
        warn!("{}: {} rows rejected", path.display(), preds.rejected.len());
        notes.push(format!("{what}: {} prediction rows rejected", preds.rejected.len()));
    }
    let by_id: HashMap<u64, &PredictionRow> = preds.rows.iter().map(|r| (r.epoch_id, r)).collect();
    let labels: HashMap<u64, usize> = set.epochs.iter().map(|e| (e.id, e.label)).collect();
    let missing: Vec<String> = test_ids
        .iter()
        .filter(|id| !by_id.contains_key(id))
        .map(u64::to_string)
        .collect();
    if !missing.is_empty() {
        return Err(HarnessError::Data(format!(
            "{}: missing predictions for {} test epochs (first: {}); {} rows rejected",
            path.display(),
            missing.len(),
            missing.into_iter().take(10).collect::<Vec<_>>().join(", "),
            preds.rejected.len()
        )));
    }
    let extra = preds.rows.len() - test_ids.len();
    if extra > 0 {
        notes.push(format!("{what}: {extra} prediction rows outside the test fold ignored"));
    }
    let mut truth = Vec::with_capacity(test_ids.len());
    let mut probs = Vec::with_capacity(test_ids.len());
    for id in test_ids {
        let row = by_id[id];
        if row.true_label != labels[id] {
            return Err(HarnessError::Data(format!(
                "{}: epoch {id} true_label {} but the store says {}",
                path.display(),
                row.true_label,
                labels[id]
            )));
        }
        truth.push(row.true_label);
        probs.push(row.probs.clone());
    }
    Ok((truth, probs))
}

/// Rerun a manifest's config into `out_dir` and check inputs and outputs
/// against the recorded hashes.
pub fn replay(manifest: &RunManifest, out_dir: &Path) -> Result<RunManifest> {
    if manifest.harness_version != HARNESS_VERSION {
        warn!(
            "manifest written by harness {}, replaying with {HARNESS_VERSION}",
            manifest.harness_version
        );
    }
    if config_hash(&manifest.config) != manifest.config_sha256 {
        return Err(HarnessError::Data(
            "manifest config does not match its recorded hash".into(),
        ));
    }
    let again = evaluate(&manifest.config, &manifest.base_dir, out_dir)?;
    let changed: Vec<&String> = manifest
        .inputs
        .iter()
        .filter(|(p, h)| again.inputs.get(*p) != Some(h))
        .map(|(p, _)| p)
        .collect();
    if !changed.is_empty() {
        return Err(HarnessError::Data(format!(
            "inputs changed since the original run: {}",
            changed.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(", ")
        )));
    }
    if again.outputs != manifest.outputs || again.results_sha256 != manifest.results_sha256 {
        return Err(HarnessError::Data(format!(
            "replay diverged: results sha256 {} vs recorded {}",
            again.results_sha256, manifest.results_sha256
        )));
    }
    Ok(again)
}
