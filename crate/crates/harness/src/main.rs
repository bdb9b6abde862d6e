use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use eegeval::config::{BudgetConfig, MontageConfig, RunConfig};
use eegeval::error::{read_file, write_file, HarnessError, Result};
use eegeval::evaluate::{self, FeatureTable};
use eegeval::ingest::{ingest, IngestInput, IngestOptions};
use eegeval::manifest::RunManifest;
use eegeval::{features, predictions, report, results, store};
use eegeval_core::efficiency::EfficiencyKind;
use eegeval_core::metrics::{score, Metric};
use eegeval_core::montage::ChannelOverride;
use eegeval_core::preprocess::{preset, PipelineSpec};
use eegeval_core::probe::ProbeConfig;
use eegeval_core::rng::derive_seed;
use eegeval_core::sampling::{sample_budget, BudgetSpec, CvScheme};
use log::info;

#[derive(Parser)]
#[command(
    name = "eegeval",
    version,
    about = "Evaluate EEG representation models under parameter, sample and channel budgets"
)]
struct Cli {
    /// More logging (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Pe,
    Se,
}

#[derive(Clone, Copy, ValueEnum)]
enum TableKind {
    Pe,
    Se,
    Channels,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(clap::Args)]
struct FoldArgs {
    /// Epoch store written by `ingest`.
    #[arg(long)]
    store: PathBuf,
    /// kfoldN or loso; defaults to the dataset preset's scheme.
    #[arg(long)]
    scheme: Option<CvScheme>,
    #[arg(long, default_value_t = 0)]
    fold_seed: u64,
}

#[derive(clap::Args, Default)]
struct Overrides {
    /// Channels per lobe (sparse montage).
    #[arg(long, conflicts_with = "lobe")]
    sparse_n: Option<usize>,
    /// Restrict to one lobe or `midline`.
    #[arg(long)]
    lobe: Option<String>,
    /// Channel taxonomy overrides: TOML table of `name = { lobe = "...", midline = bool }`.
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Total training samples.
    #[arg(long, requires = "n_subjects")]
    budget: Option<usize>,
    /// Training subjects drawn for the budget.
    #[arg(long, requires = "budget")]
    n_subjects: Option<usize>,
    /// Replace the config's seeds.
    #[arg(long = "seed", num_args = 1..)]
    seeds: Vec<u64>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Preprocess EDF recordings into an epoch store.
    Ingest {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        out: PathBuf,
        /// Data channels to keep, comma separated, in order.
        #[arg(long, value_delimiter = ',')]
        channels: Option<Vec<String>>,
        /// TOML pipeline replacing the preset's.
        #[arg(long)]
        pipeline: Option<PathBuf>,
        /// `data.edf[+annotations.edf][=class]`
        #[arg(required = true)]
        inputs: Vec<String>,
    },
    /// Print the folds of an epoch store as JSON.
    Folds {
        #[command(flatten)]
        folds: FoldArgs,
    },
    /// Draw a budget-limited training subset and print its epoch ids.
    Sample {
        #[command(flatten)]
        folds: FoldArgs,
        #[arg(long)]
        fold: usize,
        #[arg(long)]
        budget: usize,
        #[arg(long)]
        n_subjects: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Print the channel selection for a montage.
    Montage {
        #[arg(long)]
        store: PathBuf,
        #[command(flatten)]
        montage: Overrides,
    },
    /// Train a linear probe for one fold and write its predictions.
    Probe {
        #[command(flatten)]
        folds: FoldArgs,
        #[arg(long)]
        fold: usize,
        /// EMB1 embeddings; band-power features when omitted.
        #[arg(long)]
        embeddings: Option<PathBuf>,
        /// Probe settings as TOML.
        #[arg(long)]
        probe_config: Option<PathBuf>,
        #[arg(long = "lr", num_args = 1..)]
        lrs: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a predictions CSV.
    Score { predictions: PathBuf },
    /// PE or SE reports from a results table, as JSON.
    Efficiency {
        results: PathBuf,
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, default_value = "bac")]
        metric: Metric,
        /// Supervised baseline model for SE.
        #[arg(long)]
        baseline: Option<String>,
    },
    /// Render a results table.
    Report {
        results: PathBuf,
        #[arg(long, value_enum)]
        table: TableKind,
        #[arg(long, default_value = "bac")]
        metric: Metric,
        #[arg(long)]
        baseline: Option<String>,
        #[arg(long, value_enum, default_value = "text")]
        format: Format,
    },
    /// Run a full evaluation from a config file.
    Evaluate {
        config: PathBuf,
        #[arg(long, env = "EEGEVAL_OUT", default_value = "eegeval_out")]
        out: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Rerun a manifest and check that the results reproduce.
    Replay {
        manifest: PathBuf,
        #[arg(long, env = "EEGEVAL_OUT", default_value = "eegeval_replay")]
        out: PathBuf,
    },
}

fn read_text(path: &Path) -> Result<String> {
    String::from_utf8(read_file(path)?).map_err(|_| HarnessError::Data(format!("{}: not UTF-8", path.display())))
}

fn parse_toml<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    toml::from_str(&read_text(path)?).map_err(|e| HarnessError::Usage(format!("{}: {e}", path.display())))
}

fn print_json<T: serde::Serialize>(v: &T) -> Result<()> {
    let s = serde_json::to_string_pretty(v)?;
    writeln!(std::io::stdout(), "{s}").map_err(|e| HarnessError::Data(e.to_string()))
}

fn load_store(path: &Path) -> Result<eegeval_core::preprocess::EpochSet> {
    Ok(store::decode(&read_file(path)?)
        .map_err(|e| e.context(path.display()))?
        .0)
}

fn fold_config(args: &FoldArgs, dataset_id: &str) -> Result<RunConfig> {
    let cv = args
        .scheme
        .or_else(|| preset(dataset_id).map(|p| p.cv))
        .ok_or_else(|| HarnessError::Usage(format!("dataset `{dataset_id}` has no preset; pass --scheme")))?;
    Ok(RunConfig {
        dataset_id: dataset_id.into(),
        epoch_store: args.store.clone(),
        seeds: vec![0],
        cv: Some(cv),
        fold_seed: args.fold_seed,
        metrics: Metric::ALL.to_vec(),
        budget: None,
        montage: None,
        probe: ProbeConfig::default(),
        lrs: Vec::new(),
        models: Vec::new(),
    })
}

fn montage_config(o: &Overrides) -> Result<Option<MontageConfig>> {
    let overrides: BTreeMap<String, ChannelOverride> = match &o.taxonomy {
        Some(p) => parse_toml(p)?,
        None => BTreeMap::new(),
    };
    if o.sparse_n.is_none() && o.lobe.is_none() {
        return Ok(None);
    }
    Ok(Some(MontageConfig {
        sparse_n: o.sparse_n,
        region: o.lobe.clone(),
        overrides,
    }))
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Ingest {
            dataset,
            out,
            channels,
            pipeline,
            inputs,
        } => {
            let inputs = inputs
                .iter()
                .map(|s| IngestInput::parse(s))
                .collect::<Result<Vec<_>>>()?;
            let pipeline = pipeline.map(|p| parse_toml::<PipelineSpec>(&p)).transpose()?;
            let rep = ingest(&dataset, &inputs, &IngestOptions { channels, pipeline })?;
            match &rep.set {
                Some(set) => {
                    write_file(&out, &store::encode(set, &rep.log)?)?;
                    info!(
                        "{} epochs from {} subjects -> {}",
                        set.epochs.len(),
                        set.subjects().len(),
                        out.display()
                    );
                }
                None => return Err(HarnessError::Data("no input produced epochs".into())),
            }
            if !rep.failures.is_empty() {
                let list: Vec<String> = rep
                    .failures
                    .iter()
                    .map(|(p, e)| format!("{}: {e}", p.display()))
                    .collect();
                return Err(HarnessError::Data(format!(
                    "{} of {} files failed:\n  {}",
                    rep.failures.len(),
                    inputs.len(),
                    list.join("\n  ")
                )));
            }
            Ok(())
        }
        Cmd::Folds { folds } => {
            let set = load_store(&folds.store)?;
            print_json(&evaluate::folds_for(&set, &fold_config(&folds, &set.dataset_id)?)?)
        }
        Cmd::Sample {
            folds,
            fold,
            budget,
            n_subjects,
            seed,
        } => {
            let set = load_store(&folds.store)?;
            let all = evaluate::folds_for(&set, &fold_config(&folds, &set.dataset_id)?)?;
            let f = all
                .get(fold)
                .ok_or_else(|| HarnessError::Usage(format!("fold {fold} out of range (0..{})", all.len())))?;
            let spec = BudgetSpec {
                s_total: budget,
                n_subjects,
                seed,
            };
            let drawn = sample_budget(&set, &spec, &f.train_subjects)?;
            let mut per_subject: BTreeMap<&str, usize> = BTreeMap::new();
            for e in &drawn.epochs {
                *per_subject.entry(e.subject_id.as_str()).or_default() += 1;
            }
            let ids: Vec<u64> = drawn.epochs.iter().map(|e| e.id).collect();
            print_json(&serde_json::json!({ "fold_id": fold, "per_subject": per_subject, "epoch_ids": ids }))
        }
        Cmd::Montage { store, montage } => {
            let set = load_store(&store)?;
            let mc =
                montage_config(&montage)?.ok_or_else(|| HarnessError::Usage("give --sparse-n or --lobe".into()))?;
            let seed = montage.seeds.first().copied().unwrap_or(0);
            print_json(&evaluate::select_montage(&set, &mc, seed)?)
        }
        Cmd::Probe {
            folds,
            fold,
            embeddings,
            probe_config,
            lrs,
            seed,
            out,
        } => {
            let set = load_store(&folds.store)?;
            let all = evaluate::folds_for(&set, &fold_config(&folds, &set.dataset_id)?)?;
            let f = all
                .get(fold)
                .ok_or_else(|| HarnessError::Usage(format!("fold {fold} out of range (0..{})", all.len())))?;
            let feats = match &embeddings {
                Some(p) => evaluate::load_embeddings(p, &set, None)?,
                None => features::band_power(&set),
            };
            let table = FeatureTable::new(feats);
            let rows = |subjects: &[String]| table.rows(&evaluate::ids_of(&set, subjects), "probe");
            let mut cfg: ProbeConfig = match &probe_config {
                Some(p) => parse_toml(p)?,
                None => ProbeConfig::default(),
            };
            cfg.seed = derive_seed(seed, &[fold as u64]);
            let lrs = if lrs.is_empty() { vec![cfg.lr] } else { lrs };
            let (model, preds) = evaluate::fit_and_predict(
                &rows(&f.train_subjects)?,
                &rows(&f.val_subjects)?,
                &rows(&f.test_subjects)?,
                &cfg,
                &lrs,
            )?;
            info!("lr {} best epoch {}", model.lr, model.best_epoch);
            let mut buf = Vec::new();
            predictions::write(&mut buf, set.n_classes(), &preds)?;
            write_file(&out, &buf)
        }
        Cmd::Score { predictions: path } => {
            let p = predictions::parse(read_file(&path)?.as_slice()).map_err(|e| e.context(path.display()))?;
            for r in &p.rejected {
                log::warn!("{}: line {}: {}", path.display(), r.line, r.reason);
            }
            let truth: Vec<usize> = p.rows.iter().map(|r| r.true_label).collect();
            let probs: Vec<Vec<f64>> = p.rows.iter().map(|r| r.probs.clone()).collect();
            let rep = score(&truth, &probs, p.n_classes)?;
            print_json(&serde_json::json!({
                "n": p.rows.len(),
                "rejected": p.rejected.len(),
                "metrics": rep,
            }))
        }
        Cmd::Efficiency {
            results: path,
            kind,
            metric,
            baseline,
        } => {
            let cells = results::parse(read_file(&path)?.as_slice()).map_err(|e| e.context(path.display()))?;
            let kind = match kind {
                Kind::Pe => EfficiencyKind::Pe,
                Kind::Se => EfficiencyKind::Se,
            };
            print_json(&report::efficiency_reports(&cells, kind, metric, baseline.as_deref())?)
        }
        Cmd::Report {
            results: path,
            table,
            metric,
            baseline,
            format,
        } => {
            let cells = results::parse(read_file(&path)?.as_slice()).map_err(|e| e.context(path.display()))?;
            let kind = match table {
                TableKind::Pe => Some(EfficiencyKind::Pe),
                TableKind::Se => Some(EfficiencyKind::Se),
                TableKind::Channels => None,
            };
            let t = match kind {
                Some(kind) => {
                    let reps = report::efficiency_reports(&cells, kind, metric, baseline.as_deref())?;
                    if let Format::Json = format {
                        return print_json(&reps);
                    }
                    report::efficiency_summary(&reps)
                }
                None => report::channel_table(&cells, metric),
            };
            let s = match format {
                Format::Text => t.to_text(),
                Format::Csv => t.to_csv()?,
                Format::Json => serde_json::to_string_pretty(&t.rows)? + "\n",
            };
            std::io::stdout()
                .write_all(s.as_bytes())
                .map_err(|e| HarnessError::Data(e.to_string()))
        }
        Cmd::Evaluate { config, out, overrides } => {
            let mut cfg = RunConfig::parse(&read_text(&config)?).map_err(|e| e.context(config.display()))?;
            if let (Some(s_total), Some(n_subjects)) = (overrides.budget, overrides.n_subjects) {
                cfg.budget = Some(BudgetConfig { s_total, n_subjects });
            }
            if let Some(mc) = montage_config(&overrides)? {
                cfg.montage = Some(mc);
            }
            if !overrides.seeds.is_empty() {
                cfg.seeds = overrides.seeds.clone();
            }
            let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
            let base = std::fs::canonicalize(if base.as_os_str().is_empty() {
                Path::new(".")
            } else {
                &base
            })
            .map_err(eegeval::error::io_err(&base))?;
            let m = evaluate::evaluate(&cfg, &base, &out)?;
            println!("{}", out.join(&m.results_file).display());
            Ok(())
        }
        Cmd::Replay { manifest, out } => {
            let m: RunManifest = serde_json::from_slice(&read_file(&manifest)?)
                .map_err(|e| HarnessError::Data(format!("{}: {e}", manifest.display())))?;
            let again = evaluate::replay(&m, &out)?;
            println!("reproduced: results sha256 {}", again.results_sha256);
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("eegeval: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
