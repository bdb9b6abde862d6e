#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use eegeval::store;
use eegeval_core::preprocess::{Epoch, EpochSet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const CHANNELS: [&str; 8] = ["Fz", "F3", "Cz", "C3", "T7", "T8", "Pz", "Oz"];
pub const FS: f64 = 100.0;

/// Two classes that differ in their dominant rhythm (8 Hz vs 20 Hz), plus
/// noise, so band power separates them.
pub fn synthetic_set(n_subjects: usize, per_class: usize, seed: u64) -> EpochSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = 200;
    let mut epochs = Vec::new();
    for s in 0..n_subjects {
        for i in 0..per_class * 2 {
            let label = i % 2;
            let f = if label == 0 { 8.0 } else { 20.0 };
            let data = (0..CHANNELS.len())
                .map(|_| {
                    let phase = rng.gen_range(0.0..2.0 * PI);
                    (0..n)
                        .map(|t| (2.0 * PI * f * t as f64 / FS + phase).sin() + rng.gen_range(-0.5..0.5))
                        .collect()
                })
                .collect();
            epochs.push(Epoch {
                id: epochs.len() as u64,
                data,
                label,
                subject_id: format!("sub{s:02}"),
                t_start_s: i as f64 * 2.0,
            });
        }
    }
    EpochSet {
        dataset_id: "synthetic".into(),
        channels: CHANNELS.iter().map(|s| s.to_string()).collect(),
        fs_hz: FS,
        class_names: vec!["slow".into(), "fast".into()],
        epochs,
    }
}

pub fn write_store(dir: &Path, set: &EpochSet) -> std::path::PathBuf {
    let path = dir.join("synthetic.epo");
    std::fs::write(&path, store::encode(set, &["synthetic fixture".to_string()]).unwrap()).unwrap();
    path
}

pub const BUILTIN_CONFIG: &str = r#"
dataset_id = "custom"
epoch_store = "synthetic.epo"
cv = "kfold3"
seeds = [0, 1]
metrics = ["bac", "kappa", "auroc", "f1_macro"]

[probe]
max_epochs = 15

[[models]]
tag = "bandpower"
setting = "linear_probe"
source = { builtin = "bandpower" }
"#;
