use super::{LabelRule, NormMode, PipelineSpec, Reref};
use crate::sampling::CvScheme;

pub const PRESET_NAMES: [&str; 6] = [
    "physionet_mi",
    "bcic_iv2a",
    "kaggle_ern",
    "mdd_mal",
    "sleep_edf",
    "tuev",
];

pub const DEFAULT_TARGET_FS: f64 = 200.0;
pub const DEFAULT_BAND: [f64; 2] = [0.3, 75.0];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LabelRuleKind {
    Covering,
    TrialOnset,
    WholeRecording,
}

/// Dataset defaults: native acquisition parameters, preprocessing, labels
/// and cross-validation scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetPreset {
    pub name: &'static str,
    pub native_fs_hz: f64,
    pub n_channels: usize,
    pub n_subjects: usize,
    pub class_names: Vec<String>,
    pub pipeline: PipelineSpec,
    /// For `WholeRecording` presets the label comes per input file; the
    /// preset's rule carries class 0 as a placeholder.
    pub label_rule: LabelRule,
    pub cv: CvScheme,
}

impl DatasetPreset {
    pub fn rule_kind(&self) -> LabelRuleKind {
        match self.label_rule {
            LabelRule::Covering { .. } => LabelRuleKind::Covering,
            LabelRule::TrialOnset { .. } => LabelRuleKind::TrialOnset,
            LabelRule::WholeRecording { .. } => LabelRuleKind::WholeRecording,
        }
    }
}

fn pipeline(notch_hz: f64, window_s: f64, norm: NormMode) -> PipelineSpec {
    PipelineSpec {
        notch_hz: Some(notch_hz),
        notch_q: super::DEFAULT_NOTCH_Q,
        bandpass: Some(DEFAULT_BAND),
        filter_order: super::DEFAULT_FILTER_ORDER,
        target_fs_hz: Some(DEFAULT_TARGET_FS),
        reref: Reref::CommonAverage,
        norm,
        window_s,
        window_stride_s: window_s,
    }
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn map(pairs: &[(&str, usize)]) -> Vec<(String, usize)> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

pub fn preset(name: &str) -> Option<DatasetPreset> {
    let p = match name {
        "physionet_mi" => DatasetPreset {
            name: "physionet_mi",
            native_fs_hz: 160.0,
            n_channels: 64,
            n_subjects: 109,
            class_names: strings(&["left_fist", "right_fist", "both_fists", "both_feet"]),
            pipeline: pipeline(60.0, 4.0, NormMode::Zscore),
            label_rule: LabelRule::TrialOnset {
                map: map(&[("left_fist", 0), ("right_fist", 1), ("both_fists", 2), ("both_feet", 3)]),
            },
            cv: CvScheme::Kfold(5),
        },
        "bcic_iv2a" => DatasetPreset {
            name: "bcic_iv2a",
            native_fs_hz: 250.0,
            n_channels: 22,
            n_subjects: 9,
            class_names: strings(&["left_hand", "right_hand", "feet", "tongue"]),
            pipeline: pipeline(50.0, 4.0, NormMode::Zscore),
            label_rule: LabelRule::TrialOnset {
                map: map(&[("769", 0), ("770", 1), ("771", 2), ("772", 3)]),
            },
            cv: CvScheme::Loso,
        },
        "kaggle_ern" => DatasetPreset {
            name: "kaggle_ern",
            native_fs_hz: 200.0,
            n_channels: 56,
            n_subjects: 26,
            class_names: strings(&["correct", "error"]),
            pipeline: pipeline(50.0, 1.0, NormMode::Zscore),
            label_rule: LabelRule::TrialOnset {
                map: map(&[("correct", 0), ("error", 1)]),
            },
            cv: CvScheme::Kfold(5),
        },
        "mdd_mal" => DatasetPreset {
            name: "mdd_mal",
            native_fs_hz: 256.0,
            n_channels: 19,
            n_subjects: 64,
            class_names: strings(&["healthy", "mdd"]),
            pipeline: pipeline(50.0, 10.0, NormMode::Zscore),
            label_rule: LabelRule::WholeRecording { label: 0 },
            cv: CvScheme::Kfold(5),
        },
        "sleep_edf" => DatasetPreset {
            name: "sleep_edf",
            native_fs_hz: 100.0,
            n_channels: 2,
            n_subjects: 78,
            class_names: strings(&["W", "N1", "N2", "N3", "REM"]),
            pipeline: pipeline(50.0, 30.0, NormMode::Zscore),
            label_rule: LabelRule::Covering {
                map: map(&[
                    ("Sleep stage W", 0),
                    ("Sleep stage 1", 1),
                    ("Sleep stage 2", 2),
                    ("Sleep stage 3", 3),
                    ("Sleep stage 4", 3),
                    ("Sleep stage R", 4),
                ]),
            },
            cv: CvScheme::Kfold(5),
        },
        "tuev" => DatasetPreset {
            name: "tuev",
            native_fs_hz: 200.0,
            n_channels: 21,
            n_subjects: 370,
            class_names: strings(&["spsw", "gped", "pled", "eyem", "artf", "bckg"]),
            pipeline: pipeline(60.0, 5.0, NormMode::Interquartile),
            label_rule: LabelRule::TrialOnset {
                map: map(&[
                    ("spsw", 0),
                    ("gped", 1),
                    ("pled", 2),
                    ("eyem", 3),
                    ("artf", 4),
                    ("bckg", 5),
                ]),
            },
            cv: CvScheme::Kfold(5),
        },
        _ => return None,
    };
    Some(p)
}
