//! One PASS/FAIL line per acceptance criterion.
//!
//! Exits non-zero when a criterion fails, except for those listed in
//! `KNOWN_UNMET`; set `ACCEPTANCE_STRICT=1` to fail on those too.

mod common;

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::fs;
use std::time::{Duration, Instant};

use eegeval::config::RunConfig;
use eegeval::evaluate::{evaluate, replay, RESULTS_FILE};
use eegeval_core::edf::{parse_edf, write_edf, EdfHeader, Recording, SignalSpec};
use eegeval_core::efficiency::{
    aggregate, parameter_efficiency, sample_efficiency, CellResult, EfficiencyKind, Setting,
};
use eegeval_core::metrics::{argmax, auroc, balanced_accuracy, cohens_kappa, f1_macro, ConfusionMatrix, Metric};
use eegeval_core::montage::{classify_channels, select_lobe_restricted, select_sparse, Region, PHYSIONET_MI_64};
use eegeval_core::preprocess::{common_average_reref, notch, resample, Epoch, EpochSet};
use eegeval_core::probe::{gradient, loss, predict_proba, train_probe, Batch, EmbeddingSet, ProbeConfig, ProbeModel};
use eegeval_core::sampling::{sample_budget, BudgetSpec};
use eegeval_core::stats::{paired_one_sided, sign_test, stars};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

const KNOWN_UNMET: [&str; 1] = ["efficiency-arithmetic"];

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(start: Instant, limit: Duration) -> Result<(), String> {
    let t = start.elapsed();
    ensure(t < limit, || {
        format!("took {:.1} s, limit {} s", t.as_secs_f64(), limit.as_secs())
    })
}

// ---------------------------------------------------------------- metrics

fn all_matrices(k: usize, max_total: u64) -> Vec<Vec<u64>> {
    fn rec(cells: usize, left: u64, cur: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if cur.len() == cells {
            out.push(cur.clone());
            return;
        }
        for c in 0..=left {
            cur.push(c);
            rec(cells, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(k * k, max_total, &mut Vec::new(), &mut out);
    out
}

fn metric_oracle() -> Check {
    let start = Instant::now();
    let mut n_matrices = 0usize;
    for k in 2..=3 {
        for flat in all_matrices(k, 12) {
            let counts: Vec<Vec<u64>> = flat.chunks(k).map(<[u64]>::to_vec).collect();
            let samples: Vec<(usize, usize)> = counts
                .iter()
                .enumerate()
                .flat_map(|(t, row)| {
                    row.iter()
                        .enumerate()
                        .flat_map(move |(p, &c)| std::iter::repeat_n((t, p), c as usize))
                })
                .collect();
            if samples.is_empty() {
                continue;
            }
            n_matrices += 1;
            let cm = ConfusionMatrix::from_counts(counts.clone()).map_err(|e| e.to_string())?;
            let n = samples.len() as f64;

            let recalls: Option<Vec<f64>> = (0..k)
                .map(|c| {
                    let support = samples.iter().filter(|s| s.0 == c).count();
                    (support > 0)
                        .then(|| samples.iter().filter(|s| s.0 == c && s.1 == c).count() as f64 / support as f64)
                })
                .collect();
            let bac = recalls.map(|r| r.iter().sum::<f64>() / k as f64);
            match (bac, balanced_accuracy(&cm)) {
                (Some(a), Ok(b)) => ensure((a - b).abs() <= 1e-12, || format!("BAC {counts:?}: {a} vs {b}"))?,
                (None, Err(_)) => {}
                (a, b) => return Err(format!("BAC definedness differs on {counts:?}: {a:?} vs {b:?}")),
            }

            let p_o = samples.iter().filter(|s| s.0 == s.1).count() as f64 / n;
            let pairs_agree: usize = samples
                .iter()
                .map(|a| samples.iter().filter(|b| a.0 == b.1).count())
                .sum();
            let p_e = pairs_agree as f64 / (n * n);
            match (p_e < 1.0, cohens_kappa(&cm)) {
                (true, Ok(v)) => {
                    let want = (p_o - p_e) / (1.0 - p_e);
                    ensure((want - v).abs() <= 1e-12, || format!("kappa {counts:?}: {want} vs {v}"))?
                }
                (false, Err(_)) => {}
                (_, r) => return Err(format!("kappa definedness differs on {counts:?}: {r:?}")),
            }

            let f1: f64 = (0..k)
                .map(|c| {
                    let tp = samples.iter().filter(|s| s.0 == c && s.1 == c).count();
                    let wrong = samples.iter().filter(|s| (s.0 == c) != (s.1 == c)).count();
                    if 2 * tp + wrong == 0 {
                        0.0
                    } else {
                        2.0 * tp as f64 / (2 * tp + wrong) as f64
                    }
                })
                .sum::<f64>()
                / k as f64;
            let got = f1_macro(&cm).map_err(|e| e.to_string())?;
            ensure((f1 - got).abs() <= 1e-12, || format!("F1 {counts:?}: {f1} vs {got}"))?;
        }
    }

    let mut n_lists = 0usize;
    for len in 2..=8u32 {
        for code in 0..6usize.pow(len) {
            let mut c = code;
            let list: Vec<(f64, bool)> = (0..len)
                .map(|_| {
                    let v = ((c % 3) as f64, (c / 3) % 2 == 1);
                    c /= 6;
                    v
                })
                .collect();
            let pos: Vec<f64> = list.iter().filter(|x| x.1).map(|x| x.0).collect();
            let neg: Vec<f64> = list.iter().filter(|x| !x.1).map(|x| x.0).collect();
            if pos.is_empty() || neg.is_empty() {
                continue;
            }
            n_lists += 1;
            let mut favorable = 0.0;
            for p in &pos {
                for q in &neg {
                    favorable += if p > q {
                        1.0
                    } else if p == q {
                        0.5
                    } else {
                        0.0
                    };
                }
            }
            let want = favorable / (pos.len() * neg.len()) as f64;
            let got = auroc(&list).map_err(|e| e.to_string())?;
            ensure(want == got, || format!("AUROC {list:?}: {want} vs {got}"))?;
        }
    }
    within(start, Duration::from_secs(10))?;
    Ok(format!(
        "{n_matrices} matrices, {n_lists} score lists, {:.1} s",
        start.elapsed().as_secs_f64()
    ))
}

// ------------------------------------------------------------- efficiency

fn efficiency_arithmetic() -> Check {
    let pe = parameter_efficiency(56.11, 58.51, 50.0).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for _ in 0..1000 {
        let chance: f64 = rng.gen_range(0.0..0.5);
        let p: f64 = rng.gen_range(chance + 1e-6..1.0);
        let other: f64 = rng.gen_range(chance + 1e-6..1.0);
        let one = parameter_efficiency(p, p, chance).map_err(|e| e.to_string())?;
        ensure(one == 1.0, || format!("PE(p, p) = {one}"))?;
        let zero = parameter_efficiency(chance, other, chance).map_err(|e| e.to_string())?;
        ensure(zero == 0.0, || format!("PE(chance, .) = {zero}"))?;
        let se = sample_efficiency(p, p, chance).map_err(|e| e.to_string())?;
        ensure(se == 1.0, || format!("SE(p, p) = {se}"))?;
    }
    ensure((pe - 0.718).abs() <= 1e-9, || {
        format!(
            "PE(56.11, 58.51, 50) = {pe:.12}, |diff from 0.718| = {:.3e} > 1e-9; identities exact",
            (pe - 0.718).abs()
        )
    })?;
    Ok(format!("PE = {pe:.12}; identities exact"))
}

// --------------------------------------------------------------- sampler

fn epochs_from(avail: &[Vec<usize>]) -> EpochSet {
    let k = avail[0].len();
    let mut epochs = Vec::new();
    for (s, row) in avail.iter().enumerate() {
        for (c, &n) in row.iter().enumerate() {
            for _ in 0..n {
                epochs.push(Epoch {
                    id: epochs.len() as u64,
                    data: vec![vec![0.0]],
                    label: c,
                    subject_id: format!("s{s:02}"),
                    t_start_s: 0.0,
                });
            }
        }
    }
    EpochSet {
        dataset_id: "x".into(),
        channels: vec!["Cz".into()],
        fs_hz: 200.0,
        class_names: (0..k).map(|c| c.to_string()).collect(),
        epochs,
    }
}

fn class_counts(set: &EpochSet, k: usize) -> std::collections::BTreeMap<String, Vec<usize>> {
    let mut m = std::collections::BTreeMap::new();
    for e in &set.epochs {
        m.entry(e.subject_id.clone()).or_insert_with(|| vec![0; k])[e.label] += 1;
    }
    m
}

fn sampler_invariants() -> Check {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut done = 0;
    while done < 1000 {
        let k = rng.gen_range(2..7);
        let n_subj = rng.gen_range(1..8);
        let avail: Vec<Vec<usize>> = (0..n_subj)
            .map(|_| (0..k).map(|_| rng.gen_range(0..40)).collect())
            .collect();
        let n_subjects = rng.gen_range(1..=n_subj);
        let min_total = avail.iter().map(|r| r.iter().sum::<usize>()).min().unwrap();
        if n_subjects * min_total < k {
            continue;
        }
        let s_total = rng.gen_range(k..=n_subjects * min_total);
        let set = epochs_from(&avail);
        let b = BudgetSpec {
            s_total,
            n_subjects,
            seed: rng.gen(),
        };
        let out = sample_budget(&set, &b, &set.subjects()).map_err(|e| format!("{b:?}: {e}"))?;
        ensure(out.epochs.len() == s_total, || {
            format!("{b:?}: drew {}", out.epochs.len())
        })?;
        for (s, got) in class_counts(&out, k) {
            let idx: usize = s[1..].parse().unwrap();
            let quota: usize = got.iter().sum();
            if avail[idx].iter().all(|&a| a >= quota.div_ceil(k)) {
                let (lo, hi) = (got.iter().min().unwrap(), got.iter().max().unwrap());
                ensure(hi - lo <= 1, || format!("{b:?}: subject {s} classes {got:?}"))?;
            }
        }
        let again = sample_budget(&set, &b, &set.subjects()).map_err(|e| e.to_string())?;
        ensure(again == out, || format!("{b:?}: not deterministic"))?;
        done += 1;
    }

    let mut configs = 0;
    for k in [2, 4, 5, 6] {
        let set = epochs_from(&vec![vec![2000; k]; 8]);
        for s_total in [50, 100, 150, 200, 240, 480, 960, 1920] {
            for n_subjects in [1, 2, 4] {
                let b = BudgetSpec {
                    s_total,
                    n_subjects,
                    seed: 3,
                };
                let out = sample_budget(&set, &b, &set.subjects()).map_err(|e| format!("K={k} {b:?}: {e}"))?;
                ensure(out.epochs.len() == s_total, || format!("K={k} {b:?}"))?;
                configs += 1;
            }
        }
    }
    within(start, Duration::from_secs(30))?;
    Ok(format!("1000 random specs, {configs} budget configurations"))
}

// --------------------------------------------------------------- montage

fn montage_counts() -> Check {
    let names: Vec<String> = PHYSIONET_MI_64.iter().map(|s| s.to_string()).collect();
    let tax = classify_channels(&names);
    for (n, want) in [(1, 5), (2, 10), (3, 15)] {
        for seed in 0..100 {
            let got = select_sparse(&tax, n, seed).map_err(|e| e.to_string())?.selected.len();
            ensure(got == want, || format!("sparse {n} seed {seed}: {got} channels"))?;
        }
    }
    let mid: BTreeSet<String> = select_lobe_restricted(&tax, Region::Midline)
        .map_err(|e| e.to_string())?
        .selected
        .into_iter()
        .collect();
    let z: BTreeSet<String> = names
        .iter()
        .filter(|n| n.trim_end_matches('.').ends_with(['z', 'Z']) && tax.channels.iter().any(|c| &c.name == *n))
        .cloned()
        .collect();
    ensure(mid == z, || format!("midline {mid:?} vs z-names {z:?}"))?;
    let all_z = names
        .iter()
        .filter(|n| n.trim_end_matches('.').ends_with(['z', 'Z']))
        .count();
    Ok(format!(
        "{{5, 10, 15}}; midline = {} z-names ({} outside the lobe taxonomy)",
        mid.len(),
        all_z - mid.len()
    ))
}

// ----------------------------------------------------------------- probe

fn blobs(n: usize, k: usize, seed: u64) -> EmbeddingSet {
    let d = 8;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset = 6.0 / 2f64.sqrt();
    let gauss = |rng: &mut ChaCha8Rng| {
        let (u, v): (f64, f64) = (rng.gen_range(f64::EPSILON..1.0), rng.gen());
        (-2.0 * u.ln()).sqrt() * (2.0 * PI * v).cos()
    };
    let labels: Vec<usize> = (0..n).map(|i| i % k).collect();
    let mut features = Vec::with_capacity(n * d);
    for &y in &labels {
        for j in 0..d {
            features.push(gauss(&mut rng) + if j == y { offset } else { 0.0 });
        }
    }
    EmbeddingSet {
        features,
        n,
        d,
        n_classes: k,
        labels,
        subject_ids: vec!["s".into(); n],
        epoch_ids: (0..n as u64).collect(),
        model_tag: "blobs".into(),
    }
}

fn probe_convergence() -> Check {
    let start = Instant::now();
    let mut worst_bac: f64 = 1.0;
    let k = 2;
    for seed in 0..5 {
        let train = blobs(200, k, seed);
        let val = blobs(50, k, seed + 1000);
        let test = blobs(100, k, seed + 2000);
        let cfg = ProbeConfig {
            seed,
            max_epochs: 30,
            ..ProbeConfig::default()
        };
        let m = train_probe(&train, &val, &cfg).map_err(|e| e.to_string())?;
        let pred: Vec<usize> = predict_proba(&m, &test.features, test.d)
            .map_err(|e| e.to_string())?
            .iter()
            .map(|r| argmax(r))
            .collect();
        let cm = ConfusionMatrix::from_labels(&test.labels, &pred, k).map_err(|e| e.to_string())?;
        let bac = balanced_accuracy(&cm).map_err(|e| e.to_string())?;
        ensure(bac >= 0.99, || format!("seed {seed}: test BAC {bac}"))?;
        worst_bac = worst_bac.min(bac);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let (k, d, m) = (rng.gen_range(2..6), rng.gen_range(1..9), rng.gen_range(1..10));
        let wd = rng.gen_range(0.0..0.05);
        let mut model = ProbeModel::zeros(k, d);
        model.weights.iter_mut().for_each(|w| *w = rng.gen_range(-1.0..1.0));
        model.bias.iter_mut().for_each(|b| *b = rng.gen_range(-1.0..1.0));
        let rows: Vec<Vec<f64>> = (0..m)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        let batch = Batch {
            rows: rows.iter().map(Vec::as_slice).collect(),
            labels: (0..m).map(|_| rng.gen_range(0..k)).collect(),
        };
        let g = gradient(&model, &batch, wd);
        let h = 1e-5;
        let n_params = k * d + k;
        for i in 0..n_params {
            let bump = |e: f64| {
                let mut p = model.clone();
                if i < k * d {
                    p.weights[i] += e;
                } else {
                    p.bias[i - k * d] += e;
                }
                loss(&p, &batch, wd)
            };
            let fd = (bump(h) - bump(-h)) / (2.0 * h);
            let an = if i < k * d { g.weights[i] } else { g.bias[i - k * d] };
            worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-3));
        }
    }
    ensure(worst < 1e-5, || {
        format!("finite-difference max relative error {worst:.2e}")
    })?;
    within(start, Duration::from_secs(20))?;
    Ok(format!(
        "min test BAC {worst_bac:.3}, gradient max rel. error {worst:.1e}"
    ))
}

// ------------------------------------------------------------------- dsp

fn tone(f: f64, fs: f64, n: usize) -> Vec<f64> {
    (0..n).map(|t| (2.0 * PI * f * t as f64 / fs).sin()).collect()
}

fn rec(data: Vec<Vec<f64>>, fs: f64) -> Recording {
    Recording {
        subject_id: "s".into(),
        channels: (0..data.len()).map(|i| format!("C{i}")).collect(),
        fs_hz: fs,
        data,
        annotations: vec![],
    }
}

fn rms(x: &[f64]) -> f64 {
    (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt()
}

fn peak_bin(x: &[f64]) -> usize {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    (1..buf.len() / 2)
        .max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm()))
        .unwrap()
}

fn dsp_properties() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst_car: f64 = 0.0;
    for _ in 0..50 {
        let c = rng.gen_range(2..20);
        let data = (0..c)
            .map(|_| (0..256).map(|_| rng.gen_range(-300.0..300.0)).collect())
            .collect();
        let out = common_average_reref(&rec(data, 200.0)).map_err(|e| e.to_string())?;
        for t in 0..256 {
            worst_car = worst_car.max(out.data.iter().map(|r| r[t]).sum::<f64>().abs());
        }
    }
    ensure(worst_car <= 1e-9, || format!("CAR column sum {worst_car:e}"))?;

    let n = 4000;
    let input = rec(vec![tone(50.0, 200.0, n), tone(10.0, 200.0, n)], 200.0);
    let out = notch(&input, 50.0, 30.0).map_err(|e| e.to_string())?;
    let mid = 400..n - 400;
    let atten = 20.0 * (rms(&input.data[0][mid.clone()]) / rms(&out.data[0][mid.clone()])).log10();
    ensure(atten >= 26.0, || format!("50 Hz attenuated by {atten:.1} dB"))?;
    let pass = rms(&out.data[1][mid.clone()]) / rms(&input.data[1][mid]);
    ensure((pass - 1.0).abs() <= 0.01, || format!("10 Hz gain {pass:.4}"))?;

    let x = tone(10.0, 160.0, 1280);
    let y = resample(&rec(vec![x.clone()], 160.0), 200.0).map_err(|e| e.to_string())?;
    let (bx, by) = (peak_bin(&x), peak_bin(&y.data[0]));
    ensure(y.n_samples() == 1600 && bx == by, || {
        format!("bins {bx} -> {by}, {} samples", y.n_samples())
    })?;

    for case in 0..50 {
        let n_sig = rng.gen_range(1..5);
        let n_records = rng.gen_range(1..6);
        let record_s = [0.5, 1.0, 2.0, 30.0][rng.gen_range(0..4)];
        let specs: Vec<SignalSpec> = (0..n_sig)
            .map(|i| {
                let dig_min = rng.gen_range(-32768..0);
                let dig_max = rng.gen_range(1..=32767);
                SignalSpec {
                    dig_min,
                    dig_max,
                    ..SignalSpec::new(
                        &format!("EEG {i}"),
                        -rng.gen_range(1.0..1000.0),
                        rng.gen_range(1.0..1000.0),
                        rng.gen_range(1..20),
                    )
                }
            })
            .collect();
        let digital: Vec<Vec<i16>> = specs
            .iter()
            .map(|s| {
                (0..s.samples_per_record * n_records)
                    .map(|_| rng.gen_range(s.dig_min..=s.dig_max) as i16)
                    .collect()
            })
            .collect();
        let recording = Recording {
            subject_id: "S1".into(),
            channels: specs.iter().map(|s| s.label.clone()).collect(),
            fs_hz: specs[0].samples_per_record as f64 / record_s,
            data: specs
                .iter()
                .zip(&digital)
                .map(|(s, row)| row.iter().map(|&d| s.to_physical(d as i32)).collect())
                .collect(),
            annotations: vec![],
        };
        let header = EdfHeader {
            patient_id: "S1 X X X".into(),
            record_duration_s: record_s,
            ..EdfHeader::default()
        };
        let bytes = write_edf(&header, &specs, &recording).map_err(|e| format!("fixture {case}: {e}"))?;
        let back = parse_edf(&bytes).map_err(|e| format!("fixture {case}: {e}"))?;
        ensure(back.digital == digital, || {
            format!("fixture {case}: digital samples differ")
        })?;
    }
    Ok(format!(
        "CAR max |sum| {worst_car:.1e}; notch {atten:.1} dB, 10 Hz gain {pass:.4}; bin {bx} kept; 50 EDF round trips"
    ))
}

// ------------------------------------------------------------ end to end

fn end_to_end_determinism() -> Check {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    common::write_store(dir.path(), &common::synthetic_set(6, 10, 42));
    let cfg = RunConfig::parse(common::BUILTIN_CONFIG).map_err(|e| e.to_string())?;
    let first = evaluate(&cfg, dir.path(), &dir.path().join("run")).map_err(|e| e.to_string())?;
    let text = fs::read(dir.path().join("run/manifest.json")).map_err(|e| e.to_string())?;
    let manifest = serde_json::from_slice(&text).map_err(|e| e.to_string())?;
    replay(&manifest, &dir.path().join("replay")).map_err(|e| e.to_string())?;
    let a = fs::read(dir.path().join("run").join(RESULTS_FILE)).map_err(|e| e.to_string())?;
    let b = fs::read(dir.path().join("replay").join(RESULTS_FILE)).map_err(|e| e.to_string())?;
    ensure(a == b, || "replayed results differ".into())?;
    Ok(format!(
        "{} result rows, sha256 {}",
        first.runs.len() * 4,
        &first.results_sha256[..16]
    ))
}

// ---------------------------------------------------------- significance

fn significance() -> Check {
    let diffs: Vec<f64> = (0..15).map(|i| 0.01 + 0.001 * i as f64).collect();
    let sign = sign_test(&diffs);
    let want = 2f64.powi(-15);
    ensure(sign.p_value == want, || format!("sign test p = {:e}", sign.p_value))?;
    ensure(stars(sign.p_value) == "**", || {
        format!("stars `{}`", stars(sign.p_value))
    })?;

    let cell = |setting: Setting, fold: usize, value: f64| CellResult {
        model_tag: if setting == Setting::Supervised {
            "sup".into()
        } else {
            "fm".into()
        },
        setting,
        dataset_id: "d".into(),
        budget: Some(240),
        montage: "full".into(),
        fold_id: fold,
        seed: 0,
        metric: Metric::Bac,
        n_classes: 2,
        value,
    };
    let fm: Vec<CellResult> = (0..15).map(|f| cell(Setting::LinearProbe, f, 0.7 + diffs[f])).collect();
    let sup: Vec<CellResult> = (0..15).map(|f| cell(Setting::Supervised, f, 0.7)).collect();
    let rep = aggregate(
        EfficiencyKind::Se,
        &fm.iter().collect::<Vec<_>>(),
        &sup.iter().collect::<Vec<_>>(),
        0.5,
    )
    .map_err(|e| e.to_string())?;
    let p = rep.significance.map(|t| t.p_value).unwrap_or(f64::NAN);
    let routed = paired_one_sided(&diffs).p_value;
    ensure(p == want && routed == want, || {
        format!("SE table p = {p:e}, paired test p = {routed:e}")
    })?;
    Ok(format!("p = 2^-15 = {want:.3e} (**)"))
}

fn main() {
    let strict = std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    let checks: [Criterion; 8] = [
        ("metric-oracle", metric_oracle),
        ("efficiency-arithmetic", efficiency_arithmetic),
        ("sampler-invariants", sampler_invariants),
        ("montage-counts", montage_counts),
        ("probe-convergence", probe_convergence),
        ("dsp-properties", dsp_properties),
        ("end-to-end-determinism", end_to_end_determinism),
        ("significance", significance),
    ];
    let mut unexpected = 0;
    let mut passed = 0;
    for (name, check) in checks {
        match check() {
            Ok(detail) => {
                passed += 1;
                println!("PASS {name}: {detail}");
            }
            Err(why) => {
                let known = KNOWN_UNMET.contains(&name);
                println!("FAIL {name}: {why}{}", if known { " [known unmet]" } else { "" });
                if strict || !known {
                    unexpected += 1;
                }
            }
        }
    }
    println!("acceptance: {passed}/{} passed", checks.len());
    if unexpected > 0 {
        std::process::exit(1);
    }
}
