//! Built-in frozen features: log band power per channel from a Hann-windowed
//! periodogram. Lets the harness run end to end without an external model.

use std::f64::consts::PI;

use eegeval_core::preprocess::EpochSet;
use eegeval_core::probe::EmbeddingSet;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

pub const MODEL_TAG: &str = "bandpower";

/// delta, theta, alpha, beta, gamma (Hz)
pub const BANDS: [(f64, f64); 5] = [(0.5, 4.0), (4.0, 8.0), (8.0, 13.0), (13.0, 30.0), (30.0, 45.0)];

const LOG_FLOOR: f64 = 1e-12;

/// `channels x BANDS` features per epoch, in epoch order.
pub fn band_power(set: &EpochSet) -> EmbeddingSet {
    let t = set.n_samples();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(t.max(1));
    let window: Vec<f64> = (0..t)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / t as f64).cos())
        .collect();
    let df = set.fs_hz / t as f64;
    let d = set.channels.len() * BANDS.len();
    let mut features = Vec::with_capacity(set.epochs.len() * d);
    let mut buf = vec![Complex::new(0.0, 0.0); t];
    for e in &set.epochs {
        for row in &e.data {
            for ((b, x), w) in buf.iter_mut().zip(row).zip(&window) {
                *b = Complex::new(x * w, 0.0);
            }
            fft.process(&mut buf);
            for &(lo, hi) in &BANDS {
                let power: f64 = (0..=t / 2)
                    .filter(|&k| {
                        let f = k as f64 * df;
                        f >= lo && f < hi
                    })
                    .map(|k| buf[k].norm_sqr())
                    .sum();
                features.push((power / t as f64 + LOG_FLOOR).ln());
            }
        }
    }
    EmbeddingSet {
        features,
        n: set.epochs.len(),
        d,
        n_classes: set.n_classes(),
        labels: set.epochs.iter().map(|e| e.label).collect(),
        subject_ids: set.epochs.iter().map(|e| e.subject_id.clone()).collect(),
        epoch_ids: set.epochs.iter().map(|e| e.id).collect(),
        model_tag: MODEL_TAG.into(),
    }
}
