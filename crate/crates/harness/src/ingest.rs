//! EDF files -> epoch store.

use std::path::{Path, PathBuf};

use eegeval_core::edf::parse_edf;
use eegeval_core::preprocess::{preset, DatasetPreset, LabelRuleKind};
use eegeval_core::preprocess::{run_pipeline, EpochSet, LabelRule, PipelineSpec};
use log::{info, warn};

use crate::error::{read_file, HarnessError, Result};

/// One input: a data file, an optional separate annotation file and, for
/// whole-recording datasets, the class of the recording.
#[derive(Debug, Clone, PartialEq)]
pub struct IngestInput {
    pub data: PathBuf,
    pub annotations: Option<PathBuf>,
    pub class: Option<String>,
}

impl IngestInput {
    /// `data.edf[+annotations.edf][=class]`
    pub fn parse(spec: &str) -> Result<Self> {
        let (files, class) = match spec.rsplit_once('=') {
            Some((f, c)) if !c.is_empty() => (f, Some(c.to_string())),
            Some(_) => return Err(HarnessError::Usage(format!("`{spec}`: empty class after `=`"))),
            None => (spec, None),
        };
        let (data, annotations) = match files.split_once('+') {
            Some((d, a)) => (d, Some(PathBuf::from(a))),
            None => (files, None),
        };
        if data.is_empty() {
            return Err(HarnessError::Usage(format!("`{spec}`: missing data file")));
        }
        Ok(IngestInput {
            data: data.into(),
            annotations,
            class,
        })
    }
}

#[derive(Debug, Clone, Default)]
pub struct IngestOptions {
    /// Keep only these data channels, in this order.
    pub channels: Option<Vec<String>>,
    /// Replaces the preset's pipeline.
    pub pipeline: Option<PipelineSpec>,
}

#[derive(Debug)]
pub struct IngestReport {
    pub set: Option<EpochSet>,
    pub log: Vec<String>,
    pub failures: Vec<(PathBuf, String)>,
}

fn label_rule(p: &DatasetPreset, input: &IngestInput) -> Result<LabelRule> {
    match (p.rule_kind(), &input.class) {
        (LabelRuleKind::WholeRecording, Some(c)) => {
            let label = p
                .class_names
                .iter()
                .position(|n| n == c)
                .or_else(|| c.parse().ok().filter(|&i: &usize| i < p.class_names.len()))
                .ok_or_else(|| {
                    HarnessError::Usage(format!("unknown class `{c}` (known: {})", p.class_names.join(", ")))
                })?;
            Ok(LabelRule::WholeRecording { label })
        }
        (LabelRuleKind::WholeRecording, None) => Err(HarnessError::Usage(format!(
            "{}: `{}` labels whole recordings; append `=class`",
            input.data.display(),
            p.name
        ))),
        (_, Some(_)) => Err(HarnessError::Usage(format!(
            "{}: `{}` takes labels from annotations, not `=class`",
            input.data.display(),
            p.name
        ))),
        (_, None) => Ok(p.label_rule.clone()),
    }
}

fn ingest_one(
    input: &IngestInput,
    p: &DatasetPreset,
    spec: &PipelineSpec,
    opts: &IngestOptions,
) -> Result<(EpochSet, Vec<String>)> {
    let rule = label_rule(p, input)?;
    let file = parse_edf(&read_file(&input.data)?)?;
    for w in &file.warnings {
        warn!("{}: {w}", input.data.display());
    }
    let mut rec = file.recording;
    if rec.subject_id.is_empty() || rec.subject_id == "X" {
        rec.subject_id = input
            .data
            .file_stem()
            .map_or_else(|| "unknown".into(), |s| s.to_string_lossy().into_owned());
    }
    if let Some(path) = &input.annotations {
        let ann = parse_edf(&read_file(path)?).map_err(|e| HarnessError::from(e).context(path.display()))?;
        rec.annotations = ann.recording.annotations;
    }
    if let Some(wanted) = &opts.channels {
        let mut data = Vec::with_capacity(wanted.len());
        for w in wanted {
            let i = rec
                .channels
                .iter()
                .position(|c| c.trim().eq_ignore_ascii_case(w.trim()))
                .ok_or_else(|| HarnessError::Data(format!("no channel `{w}` (have: {})", rec.channels.join(", "))))?;
            data.push(rec.data[i].clone());
        }
        rec.channels = wanted.clone();
        rec.data = data;
    }
    Ok(run_pipeline(&rec, spec, &rule, &p.class_names, p.name)?)
}

/// Preprocess every input; a file that fails is reported and skipped.
pub fn ingest(dataset: &str, inputs: &[IngestInput], opts: &IngestOptions) -> Result<IngestReport> {
    let p = preset(dataset).ok_or_else(|| HarnessError::Usage(format!("unknown dataset preset `{dataset}`")))?;
    let spec = opts.pipeline.clone().unwrap_or_else(|| p.pipeline.clone());
    let mut report = IngestReport {
        set: None,
        log: Vec::new(),
        failures: Vec::new(),
    };
    for input in inputs {
        let result = ingest_one(input, &p, &spec, opts).and_then(|(set, log)| {
            let n = set.epochs.len();
            match report.set.as_mut() {
                None => report.set = Some(set),
                Some(all) => all.merge(set)?,
            }
            Ok((n, log))
        });
        match result {
            Ok((n, log)) => {
                info!("{}: {n} epochs", input.data.display());
                report
                    .log
                    .extend(log.into_iter().map(|l| format!("{}: {l}", display(&input.data))));
            }
            Err(e) => {
                warn!("{}: {e}", input.data.display());
                report.failures.push((input.data.clone(), e.to_string()));
            }
        }
    }
    Ok(report)
}

fn display(p: &Path) -> String {
    p.file_name()
        .map_or_else(|| p.display().to_string(), |f| f.to_string_lossy().into_owned())
}
