//! Deterministic preprocessing: notch, band-pass, resample, common average
//! reference, windowing and per-epoch normalization, applied in that order.

mod filter;
mod presets;
mod resample;
mod window;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::edf::Recording;

pub use filter::{butter_bandpass_design, notch_design, Biquad, Sos};
pub use presets::{preset, DatasetPreset, LabelRuleKind, PRESET_NAMES};
pub use resample::{rational_ratio, resample_signal};
pub use window::{windowize, LabelRule};

pub const NORM_EPS: f64 = 1e-8;
pub const DEFAULT_NOTCH_Q: f64 = 30.0;
pub const DEFAULT_FILTER_ORDER: usize = 4;
/// Band edges are clipped to this fraction of the sampling rate.
pub const NYQUIST_GUARD: f64 = 0.45;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PreprocessError {
    #[error("frequency {freq} Hz violates Nyquist at fs = {fs} Hz")]
    NyquistViolation { freq: f64, fs: f64 },
    #[error("invalid band: low {low} Hz must be > 0 and < high {high} Hz")]
    InvalidBand { low: f64, high: f64 },
    #[error("common average reference needs >= 2 channels, got {0}")]
    TooFewChannels(usize),
    #[error("no complete window: {0}")]
    EmptyResult(String),
    #[error("invalid pipeline: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reref {
    CommonAverage,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    Zscore,
    Interquartile,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineSpec {
    pub notch_hz: Option<f64>,
    #[serde(default = "default_notch_q")]
    pub notch_q: f64,
    /// `[low_hz, high_hz]`
    pub bandpass: Option<[f64; 2]>,
    #[serde(default = "default_order")]
    pub filter_order: usize,
    pub target_fs_hz: Option<f64>,
    pub reref: Reref,
    pub norm: NormMode,
    pub window_s: f64,
    pub window_stride_s: f64,
}

fn default_notch_q() -> f64 {
    DEFAULT_NOTCH_Q
}

fn default_order() -> usize {
    DEFAULT_FILTER_ORDER
}

impl PipelineSpec {
    /// Concrete settings for a recording at `native_fs`: band edges are
    /// clipped below `NYQUIST_GUARD` of the lowest rate the signal passes
    /// through, and a notch at or above the native Nyquist is dropped.
    /// Returns the adjusted spec and a note per adjustment.
    pub fn resolve_for(&self, native_fs: f64) -> Result<(PipelineSpec, Vec<String>), PreprocessError> {
        if !(self.window_s > 0.0) || !(self.window_stride_s > 0.0) {
            return Err(PreprocessError::InvalidSpec(
                "window and stride must be positive".into(),
            ));
        }
        if let Some(t) = self.target_fs_hz {
            if !(t > 0.0) {
                return Err(PreprocessError::InvalidSpec(format!("target rate {t} Hz")));
            }
        }
        let mut out = self.clone();
        let mut notes = Vec::new();
        let min_fs = self.target_fs_hz.map_or(native_fs, |t| t.min(native_fs));
        if let Some(f0) = self.notch_hz {
            if f0 >= native_fs / 2.0 {
                notes.push(format!("notch {f0} Hz dropped: at or above Nyquist of {native_fs} Hz"));
                out.notch_hz = None;
            }
        }
        if let Some([low, high]) = self.bandpass {
            let limit = NYQUIST_GUARD * min_fs;
            if high > limit {
                notes.push(format!("band-pass high edge clipped {high} -> {limit} Hz"));
                out.bandpass = Some([low, limit]);
            }
            let [low, high] = out.bandpass.expect("set above");
            if !(low > 0.0) || low >= high {
                return Err(PreprocessError::InvalidBand { low, high });
            }
        }
        Ok((out, notes))
    }
}

fn map_channels(rec: &Recording, f: impl Fn(&[f64]) -> Vec<f64>) -> Recording {
    Recording {
        data: rec.data.iter().map(|row| f(row)).collect(),
        ..rec.clone()
    }
}

pub fn notch(rec: &Recording, f0: f64, q: f64) -> Result<Recording, PreprocessError> {
    if !(f0 > 0.0) || f0 >= rec.fs_hz / 2.0 {
        return Err(PreprocessError::NyquistViolation {
            freq: f0,
            fs: rec.fs_hz,
        });
    }
    if !(q > 0.0) {
        return Err(PreprocessError::InvalidSpec(format!("notch quality factor {q}")));
    }
    let sos = notch_design(f0, q, rec.fs_hz);
    Ok(map_channels(rec, |x| sos.filtfilt(x)))
}

pub fn bandpass(rec: &Recording, low: f64, high: f64, order: usize) -> Result<Recording, PreprocessError> {
    if !(low > 0.0) || low >= high {
        return Err(PreprocessError::InvalidBand { low, high });
    }
    if high >= rec.fs_hz / 2.0 {
        return Err(PreprocessError::NyquistViolation {
            freq: high,
            fs: rec.fs_hz,
        });
    }
    if order == 0 {
        return Err(PreprocessError::InvalidSpec("filter order must be >= 1".into()));
    }
    let sos = butter_bandpass_design(low, high, order, rec.fs_hz);
    Ok(map_channels(rec, |x| sos.filtfilt(x)))
}

pub fn resample(rec: &Recording, target_fs: f64) -> Result<Recording, PreprocessError> {
    if !(target_fs > 0.0) {
        return Err(PreprocessError::InvalidSpec(format!("target rate {target_fs} Hz")));
    }
    if target_fs == rec.fs_hz {
        return Ok(rec.clone());
    }
    let (up, down) = rational_ratio(rec.fs_hz, target_fs);
    let mut out = map_channels(rec, |x| resample_signal(x, up, down));
    out.fs_hz = target_fs;
    Ok(out)
}

pub fn common_average_reref(rec: &Recording) -> Result<Recording, PreprocessError> {
    let c = rec.data.len();
    if c < 2 {
        return Err(PreprocessError::TooFewChannels(c));
    }
    let n = rec.n_samples();
    let mean: Vec<f64> = (0..n)
        .map(|t| rec.data.iter().map(|row| row[t]).sum::<f64>() / c as f64)
        .collect();
    Ok(map_channels(rec, |x| x.iter().zip(&mean).map(|(v, m)| v - m).collect()))
}

/// Quantile by linear interpolation between order statistics, using the
/// midpoint plotting position `p_k = (k - 0.5) / n`.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    let h = (n as f64 * q + 0.5).clamp(1.0, n as f64);
    let lo = h.floor() as usize;
    let frac = h - lo as f64;
    let a = sorted[lo - 1];
    if lo == n {
        a
    } else {
        a + frac * (sorted[lo] - a)
    }
}

/// Normalize one channel in place.
pub fn normalize_channel(x: &mut [f64], mode: NormMode) {
    if x.is_empty() {
        return;
    }
    if mode == NormMode::None {
        return;
    }
    if x.iter().all(|v| *v == x[0]) {
        x.fill(0.0);
        return;
    }
    let (center, scale) = match mode {
        NormMode::None => unreachable!(),
        NormMode::Zscore => {
            let n = x.len() as f64;
            let mean = x.iter().sum::<f64>() / n;
            let var = x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
            (mean, var.sqrt())
        }
        NormMode::Interquartile => {
            let mut s = x.to_vec();
            s.sort_by(f64::total_cmp);
            let med = quantile_sorted(&s, 0.5);
            (med, quantile_sorted(&s, 0.75) - quantile_sorted(&s, 0.25))
        }
    };
    for v in x.iter_mut() {
        *v = (*v - center) / (scale + NORM_EPS);
    }
}

pub fn normalize(epoch: &Epoch, mode: NormMode) -> Epoch {
    let mut out = epoch.clone();
    for row in &mut out.data {
        normalize_channel(row, mode);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Epoch {
    pub id: u64,
    /// channels x samples
    pub data: Vec<Vec<f64>>,
    pub label: usize,
    pub subject_id: String,
    pub t_start_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochSet {
    pub dataset_id: String,
    pub channels: Vec<String>,
    pub fs_hz: f64,
    pub class_names: Vec<String>,
    pub epochs: Vec<Epoch>,
}

impl EpochSet {
    pub fn n_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn n_samples(&self) -> usize {
        self.epochs.first().and_then(|e| e.data.first()).map_or(0, Vec::len)
    }

    /// Sorted, de-duplicated subject ids.
    pub fn subjects(&self) -> Vec<String> {
        let mut s: Vec<String> = self.epochs.iter().map(|e| e.subject_id.clone()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// A set with the same metadata holding only the given epochs.
    pub fn with_epochs(&self, epochs: Vec<Epoch>) -> EpochSet {
        EpochSet {
            dataset_id: self.dataset_id.clone(),
            channels: self.channels.clone(),
            fs_hz: self.fs_hz,
            class_names: self.class_names.clone(),
            epochs,
        }
    }

    /// Append another set's epochs, renumbering ids to stay unique.
    pub fn merge(&mut self, other: EpochSet) -> Result<(), PreprocessError> {
        if other.channels != self.channels || other.fs_hz != self.fs_hz || other.class_names != self.class_names {
            return Err(PreprocessError::InvalidSpec(
                "cannot merge epoch sets with different channels, rates or classes".into(),
            ));
        }
        let next = self.epochs.iter().map(|e| e.id + 1).max().unwrap_or(0);
        self.epochs
            .extend(other.epochs.into_iter().enumerate().map(|(i, mut e)| {
                e.id = next + i as u64;
                e
            }));
        Ok(())
    }

    pub fn validate(&self) -> Result<(), PreprocessError> {
        if self.n_classes() < 2 {
            return Err(PreprocessError::InvalidSpec(format!(
                "need >= 2 classes, got {}",
                self.n_classes()
            )));
        }
        let (c, t) = (self.channels.len(), self.n_samples());
        for e in &self.epochs {
            if e.label >= self.n_classes() {
                return Err(PreprocessError::InvalidSpec(format!(
                    "epoch {} label {} out of range",
                    e.id, e.label
                )));
            }
            if e.data.len() != c || e.data.iter().any(|r| r.len() != t) {
                return Err(PreprocessError::InvalidSpec(format!(
                    "epoch {} has inconsistent shape",
                    e.id
                )));
            }
            if e.data.iter().flatten().any(|v| !v.is_finite()) {
                return Err(PreprocessError::InvalidSpec(format!(
                    "epoch {} has non-finite values",
                    e.id
                )));
            }
        }
        Ok(())
    }
}

/// Run the full pipeline on one recording. Returns the epochs and a log of
/// the transforms applied.
pub fn run_pipeline(
    rec: &Recording,
    spec: &PipelineSpec,
    rule: &LabelRule,
    class_names: &[String],
    dataset_id: &str,
) -> Result<(EpochSet, Vec<String>), PreprocessError> {
    let (spec, mut log) = spec.resolve_for(rec.fs_hz)?;
    let mut cur = rec.clone();
    if let Some(f0) = spec.notch_hz {
        cur = notch(&cur, f0, spec.notch_q)?;
        log.push(format!("notch {f0} Hz q={}", spec.notch_q));
    }
    if let Some([low, high]) = spec.bandpass {
        cur = bandpass(&cur, low, high, spec.filter_order)?;
        log.push(format!("bandpass {low}-{high} Hz order {}", spec.filter_order));
    }
    if let Some(t) = spec.target_fs_hz {
        if t != cur.fs_hz {
            log.push(format!("resample {} -> {t} Hz", cur.fs_hz));
            cur = resample(&cur, t)?;
        }
    }
    if spec.reref == Reref::CommonAverage {
        cur = common_average_reref(&cur)?;
        log.push("common average reference".into());
    }
    let mut set = windowize(&cur, spec.window_s, spec.window_stride_s, rule, class_names, dataset_id)?;
    log.push(format!(
        "windowize {} s stride {} s -> {} epochs",
        spec.window_s,
        spec.window_stride_s,
        set.epochs.len()
    ));
    if spec.norm != NormMode::None {
        for e in &mut set.epochs {
            for row in &mut e.data {
                normalize_channel(row, spec.norm);
            }
        }
        log.push(format!("normalize {:?}", spec.norm).to_lowercase());
    }
    Ok((set, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn sine_recording(freqs: &[f64], fs: f64, n: usize) -> Recording {
        Recording {
            subject_id: "s".into(),
            channels: freqs.iter().enumerate().map(|(i, _)| format!("C{i}")).collect(),
            fs_hz: fs,
            data: freqs
                .iter()
                .map(|f| (0..n).map(|t| (2.0 * PI * f * t as f64 / fs).sin()).collect())
                .collect(),
            annotations: vec![],
        }
    }

    fn rms(x: &[f64]) -> f64 {
        (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
    }

    #[test]
    fn notch_errors() {
        let rec = sine_recording(&[10.0], 200.0, 100);
        assert!(matches!(
            notch(&rec, 120.0, 30.0),
            Err(PreprocessError::NyquistViolation { .. })
        ));
        assert!(matches!(
            notch(&rec, 100.0, 30.0),
            Err(PreprocessError::NyquistViolation { .. })
        ));
    }

    #[test]
    fn notch_kills_50_keeps_10() {
        let rec = sine_recording(&[50.0, 10.0], 200.0, 2000);
        let out = notch(&rec, 50.0, 30.0).unwrap();
        assert_eq!(out.n_samples(), 2000);
        // Steady state: one second clear of each edge transient.
        let mid = 200..1800;
        assert!(rms(&out.data[0][mid.clone()]) < 0.05 * rms(&rec.data[0][mid.clone()]));
        let ratio = rms(&out.data[1][mid.clone()]) / rms(&rec.data[1][mid]);
        assert!((ratio - 1.0).abs() < 0.01, "{ratio}");
    }

    #[test]
    fn bandpass_errors() {
        let rec = sine_recording(&[10.0], 200.0, 100);
        assert!(matches!(
            bandpass(&rec, 40.0, 0.5, 4),
            Err(PreprocessError::InvalidBand { .. })
        ));
        assert!(matches!(
            bandpass(&rec, 0.5, 100.0, 4),
            Err(PreprocessError::NyquistViolation { .. })
        ));
    }

    #[test]
    fn bandpass_removes_dc_keeps_10hz() {
        let mut rec = sine_recording(&[10.0], 200.0, 4000);
        rec.data.push(vec![5.0; 4000]);
        rec.channels.push("dc".into());
        let out = bandpass(&rec, 0.5, 40.0, 4).unwrap();
        let mean_abs = out.data[1].iter().map(|v| v.abs()).sum::<f64>() / 4000.0;
        assert!(mean_abs < 1e-3 * 5.0, "{mean_abs}");
        let amp = out.data[0][1000..3000].iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!((amp - 1.0).abs() < 0.02, "{amp}");
    }

    #[test]
    fn resample_identity_is_bitwise() {
        let rec = sine_recording(&[10.0, 3.0], 200.0, 321);
        assert_eq!(resample(&rec, 200.0).unwrap(), rec);
    }

    #[test]
    fn car_errors_and_identity() {
        let rec = sine_recording(&[10.0], 200.0, 10);
        assert_eq!(common_average_reref(&rec), Err(PreprocessError::TooFewChannels(1)));
        let mut two = rec.clone();
        two.data.push(rec.data[0].clone());
        two.channels.push("dup".into());
        let out = common_average_reref(&two).unwrap();
        assert!(out.data.iter().flatten().all(|v| *v == 0.0));
    }

    #[test]
    fn hazen_quantiles_on_1_to_100() {
        let s: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(quantile_sorted(&s, 0.5), 50.5);
        assert_eq!(quantile_sorted(&s, 0.25), 25.5);
        assert_eq!(quantile_sorted(&s, 0.75), 75.5);
        assert_eq!(quantile_sorted(&[7.0], 0.9), 7.0);
    }

    #[test]
    fn normalization_modes() {
        let mut x: Vec<f64> = (1..=100).map(f64::from).collect();
        let orig = x.clone();
        normalize_channel(&mut x, NormMode::Interquartile);
        for (o, v) in orig.iter().zip(&x) {
            assert_eq!(*v, (o - 50.5) / 50.00000001);
        }

        let mut z: Vec<f64> = (0..57).map(|i| (i as f64 * 0.37).sin() * 3.0 + 1.0).collect();
        normalize_channel(&mut z, NormMode::Zscore);
        let mean = z.iter().sum::<f64>() / 57.0;
        let std = (z.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 57.0).sqrt();
        assert!(mean.abs() < 1e-9);
        assert!((std - 1.0).abs() < 1e-6);

        for mode in [NormMode::Zscore, NormMode::Interquartile] {
            let mut flat = vec![4.2; 10];
            normalize_channel(&mut flat, mode);
            assert!(flat.iter().all(|v| *v == 0.0));
        }
    }

    #[test]
    fn resolve_clips_and_drops() {
        let spec = preset("sleep_edf").unwrap().pipeline;
        let (r, notes) = spec.resolve_for(100.0).unwrap();
        assert_eq!(r.bandpass, Some([0.3, 45.0]));
        assert_eq!(r.notch_hz, None);
        assert_eq!(notes.len(), 2);
        let spec = preset("kaggle_ern").unwrap().pipeline;
        let (r, notes) = spec.resolve_for(200.0).unwrap();
        assert_eq!(r, spec);
        assert!(notes.is_empty());
    }
}
