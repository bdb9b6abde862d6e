use serde::{Deserialize, Serialize};

use super::{Epoch, EpochSet, PreprocessError};
use crate::edf::Recording;

/// How a window gets its class label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LabelRule {
    /// Each window takes the label of an annotation spanning the whole
    /// window (sleep staging). Windows without one are skipped.
    Covering { map: Vec<(String, usize)> },
    /// One window per mapped annotation, starting at its onset (trials).
    TrialOnset { map: Vec<(String, usize)> },
    /// Every window takes the recording's label.
    WholeRecording { label: usize },
}

fn lookup(map: &[(String, usize)], label: &str) -> Option<usize> {
    let label = label.trim();
    map.iter().find(|(k, _)| k == label).map(|(_, v)| *v)
}

/// Cut a recording into labeled epochs, left to right. Epoch ids count
/// from zero in emission order.
pub fn windowize(
    rec: &Recording,
    window_s: f64,
    stride_s: f64,
    rule: &LabelRule,
    class_names: &[String],
    dataset_id: &str,
) -> Result<EpochSet, PreprocessError> {
    if !(window_s > 0.0) || !(stride_s > 0.0) {
        return Err(PreprocessError::InvalidSpec(
            "window and stride must be positive".into(),
        ));
    }
    let fs = rec.fs_hz;
    let len = (window_s * fs).round() as usize;
    let stride = ((stride_s * fs).round() as usize).max(1);
    let n = rec.n_samples();
    if len == 0 || len > n {
        return Err(PreprocessError::EmptyResult(format!(
            "{window_s} s window longer than {:.3} s recording",
            rec.duration_s()
        )));
    }

    let slice =
        |start: usize| -> Vec<Vec<f64>> { rec.data.iter().map(|row| row[start..start + len].to_vec()).collect() };
    let mut epochs = Vec::new();
    let mut push = |start: usize, label: usize| {
        if label >= class_names.len() {
            return;
        }
        epochs.push(Epoch {
            id: epochs.len() as u64,
            data: slice(start),
            label,
            subject_id: rec.subject_id.clone(),
            t_start_s: start as f64 / fs,
        });
    };

    match rule {
        LabelRule::WholeRecording { label } => {
            let mut start = 0;
            while start + len <= n {
                push(start, *label);
                start += stride;
            }
        }
        LabelRule::Covering { map } => {
            let tol = 0.5 / fs;
            let mut start = 0;
            while start + len <= n {
                let t0 = start as f64 / fs;
                let t1 = t0 + window_s;
                let label = rec
                    .annotations
                    .iter()
                    .filter(|a| a.onset_s <= t0 + tol && a.onset_s + a.duration_s >= t1 - tol)
                    .find_map(|a| lookup(map, &a.label));
                if let Some(l) = label {
                    push(start, l);
                }
                start += stride;
            }
        }
        LabelRule::TrialOnset { map } => {
            let mut trials: Vec<(f64, usize)> = rec
                .annotations
                .iter()
                .filter_map(|a| lookup(map, &a.label).map(|l| (a.onset_s, l)))
                .collect();
            trials.sort_by(|a, b| a.0.total_cmp(&b.0));
            for (onset, label) in trials {
                let start = (onset * fs).round();
                if start >= 0.0 && start as usize + len <= n {
                    push(start as usize, label);
                }
            }
        }
    }

    if epochs.is_empty() {
        return Err(PreprocessError::EmptyResult("no labeled window".into()));
    }
    Ok(EpochSet {
        dataset_id: dataset_id.to_string(),
        channels: rec.channels.clone(),
        fs_hz: fs,
        class_names: class_names.to_vec(),
        epochs,
    })
}
