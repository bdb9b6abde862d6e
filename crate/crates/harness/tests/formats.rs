mod common;

use eegeval::config::{fill_template, RunConfig, Source};
use eegeval::emb1::{self, Emb1, Emb1Meta, Emb1Record};
use eegeval::error::HarnessError;
use eegeval::predictions::{self, PredictionRow};
use eegeval::{results, store};
use eegeval_core::efficiency::{CellResult, Setting};
use eegeval_core::metrics::Metric;
use proptest::prelude::*;

fn emb1_strategy() -> impl Strategy<Value = Emb1> {
    (1usize..6, 2usize..5).prop_flat_map(|(d, k)| {
        prop::collection::vec((prop::option::of(0..k), prop::collection::vec(-1e6f32..1e6, d)), 0..20).prop_map(
            move |rows| Emb1 {
                d,
                n_classes: k,
                records: rows
                    .into_iter()
                    .enumerate()
                    .map(|(i, (label, features))| Emb1Record {
                        epoch_id: i as u64 * 7 + 3,
                        label,
                        features,
                    })
                    .collect(),
            },
        )
    })
}

proptest! {
    #[test]
    fn emb1_round_trips(emb in emb1_strategy()) {
        let bytes = emb.encode().unwrap();
        prop_assert_eq!(bytes.len(), 20 + emb.records.len() * (12 + 4 * emb.d));
        prop_assert_eq!(Emb1::decode(&bytes).unwrap(), emb);
    }

    #[test]
    fn emb1_rejects_truncation(emb in emb1_strategy(), cut in 1usize..8) {
        let bytes = emb.encode().unwrap();
        let n = bytes.len().saturating_sub(cut);
        prop_assert!(Emb1::decode(&bytes[..n]).is_err());
    }

    #[test]
    fn predictions_round_trip(rows in prop::collection::vec((0usize..3, 0.0f64..1.0, 0.0f64..1.0), 1..30)) {
        let rows: Vec<PredictionRow> = rows
            .into_iter()
            .enumerate()
            .map(|(i, (y, a, b))| {
                let s = a + b + 1.0;
                PredictionRow { epoch_id: i as u64, true_label: y, probs: vec![a / s, b / s, 1.0 / s] }
            })
            .collect();
        let mut buf = Vec::new();
        predictions::write(&mut buf, 3, &rows).unwrap();
        let back = predictions::parse(buf.as_slice()).unwrap();
        prop_assert!(back.rejected.is_empty());
        prop_assert_eq!(back.rows, rows);
    }
}

#[test]
fn emb1_sidecar_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("e.emb1");
    let emb = Emb1 {
        d: 2,
        n_classes: 2,
        records: vec![
            Emb1Record {
                epoch_id: 0,
                label: Some(1),
                features: vec![0.5, -1.0],
            },
            Emb1Record {
                epoch_id: 1,
                label: None,
                features: vec![2.0, 3.0],
            },
        ],
    };
    let meta = Emb1Meta {
        model_tag: "m".into(),
        dataset_id: "d".into(),
        subject_ids: vec!["a".into(), "b".into()],
        t_start_s: vec![0.0, 4.0],
        window_s: 4.0,
        channels: Some(vec!["Cz".into()]),
    };
    emb1::write(&path, &emb, &meta).unwrap();
    assert!(emb1::sidecar_path(&path).exists());
    assert_eq!(emb1::read(&path).unwrap(), (emb, meta));
}

#[test]
fn emb1_rejects_bad_magic_labels_and_duplicates() {
    let mut emb = Emb1 {
        d: 1,
        n_classes: 2,
        records: vec![Emb1Record {
            epoch_id: 5,
            label: Some(0),
            features: vec![1.0],
        }],
    };
    let mut bytes = emb.encode().unwrap();
    bytes[0] = b'X';
    assert!(Emb1::decode(&bytes).is_err());

    emb.records.push(emb.records[0].clone());
    assert!(Emb1::decode(&emb.encode().unwrap()).is_err());

    emb.records.pop();
    emb.records[0].label = Some(2);
    assert!(emb.encode().is_err() || Emb1::decode(&emb.encode().unwrap()).is_err());

    emb.records[0].label = Some(0);
    emb.records[0].features = vec![f32::NAN];
    assert!(emb.encode().is_err() || Emb1::decode(&emb.encode().unwrap()).is_err());
}

#[test]
fn prediction_rows_that_are_not_distributions_are_counted() {
    let csv = "epoch_id,true_label,p_0,p_1\n\
               0,0,0.9,0.1\n\
               1,1,0.5,0.6\n\
               2,1,-0.1,1.1\n\
               3,2,0.5,0.5\n\
               4,0,abc,0.5\n\
               5,1,0.3\n\
               0,1,0.2,0.8\n\
               6,1,0.2999999999,0.7\n";
    let p = predictions::parse(csv.as_bytes()).unwrap();
    assert_eq!(p.n_classes, 2);
    let ids: Vec<u64> = p.rows.iter().map(|r| r.epoch_id).collect();
    assert_eq!(ids, vec![0, 6]);
    let lines: Vec<u64> = p.rejected.iter().map(|r| r.line).collect();
    assert_eq!(lines, vec![3, 4, 5, 6, 7, 8]);
}

#[test]
fn prediction_header_is_checked() {
    for bad in [
        "id,true_label,p_0,p_1\n",
        "epoch_id,true_label,p_0\n",
        "epoch_id,true_label,p_1,p_0\n",
    ] {
        assert!(
            matches!(predictions::parse(bad.as_bytes()), Err(HarnessError::Data(_))),
            "{bad}"
        );
    }
}

#[test]
fn results_table_round_trips() {
    let cells = vec![
        CellResult {
            model_tag: "labram".into(),
            setting: Setting::LinearProbe,
            dataset_id: "tuev".into(),
            budget: Some(240),
            montage: "sparse2".into(),
            fold_id: 3,
            seed: 7,
            metric: Metric::Kappa,
            n_classes: 6,
            value: 0.4123456789,
        },
        CellResult {
            model_tag: "eegnet".into(),
            setting: Setting::Supervised,
            dataset_id: "tuev".into(),
            budget: None,
            montage: "full".into(),
            fold_id: 0,
            seed: 0,
            metric: Metric::Bac,
            n_classes: 6,
            value: 0.1,
        },
    ];
    let mut buf = Vec::new();
    results::write(&mut buf, &cells).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("model_tag,setting,dataset_id,budget,montage,fold_id,seed,metric,n_classes,value\n"));
    assert_eq!(results::parse(buf.as_slice()).unwrap(), cells);
}

#[test]
fn epoch_store_round_trips() {
    let mut set = common::synthetic_set(2, 3, 1);
    // f32 storage: round the fixture so equality is exact.
    for e in &mut set.epochs {
        for row in &mut e.data {
            for v in row {
                *v = *v as f32 as f64;
            }
        }
    }
    let bytes = store::encode(&set, &["a".into()]).unwrap();
    let (back, meta) = store::decode(&bytes).unwrap();
    assert_eq!(back, set);
    assert_eq!(meta.log, vec!["a".to_string()]);
    assert!(store::decode(&bytes[..bytes.len() - 1]).is_err());
}

#[test]
fn config_parses_and_validates() {
    let cfg = RunConfig::parse(common::BUILTIN_CONFIG).unwrap();
    assert_eq!(cfg.models[0].source, Source::Builtin("bandpower".into()));
    assert_eq!(cfg.learning_rates(), vec![1e-2, 1e-3]);
    assert_eq!(cfg.probe.max_epochs, 15);

    let bad = [
        ("unknown key", common::BUILTIN_CONFIG.replace("seeds", "seedz")),
        (
            "no seeds",
            common::BUILTIN_CONFIG.replace("seeds = [0, 1]", "seeds = []"),
        ),
        (
            "custom without cv",
            common::BUILTIN_CONFIG.replace("cv = \"kfold3\"", ""),
        ),
        (
            "unknown dataset",
            common::BUILTIN_CONFIG.replace("\"custom\"", "\"nope\""),
        ),
        (
            "builtin on supervised",
            common::BUILTIN_CONFIG.replace("linear_probe", "supervised"),
        ),
    ];
    for (what, text) in bad {
        assert!(matches!(RunConfig::parse(&text), Err(HarnessError::Usage(_))), "{what}");
    }
}

#[test]
fn path_templates() {
    assert_eq!(
        fill_template("p/{fold}_{seed}_{budget}_{montage}.csv", 2, 9, None, "full"),
        "p/2_9_full_full.csv"
    );
    assert_eq!(fill_template("{budget}", 0, 0, Some(480), "x"), "480");
}
