use std::collections::BTreeSet;

use eegeval_core::montage::{
    apply, classify_channels, select_lobe_restricted, select_sparse, Lobe, Region, PHYSIONET_MI_64,
};
use eegeval_core::preprocess::{Epoch, EpochSet};
use proptest::prelude::*;

fn physionet() -> Vec<String> {
    PHYSIONET_MI_64.iter().map(|s| s.to_string()).collect()
}

fn is_midline_name(name: &str) -> bool {
    let core = name.trim_end_matches('.');
    core.ends_with(['z', 'Z']) && core.chars().all(|c| c.is_ascii_alphabetic())
}

proptest! {
    #[test]
    fn sparse_selection_is_order_invariant_and_lobe_balanced(
        n in 1usize..6,
        seed in any::<u64>(),
        perm in Just(physionet()).prop_shuffle(),
    ) {
        let tax = classify_channels(&physionet());
        let shuffled = classify_channels(&perm);
        let a = select_sparse(&tax, n, seed).unwrap();
        let b = select_sparse(&shuffled, n, seed).unwrap();
        prop_assert_eq!(&a, &b);

        let distinct: BTreeSet<&String> = a.selected.iter().collect();
        prop_assert_eq!(distinct.len(), a.selected.len());
        let expected: usize = Lobe::ALL.iter().map(|&l| n.min(tax.lobe_members(l).len())).sum();
        prop_assert_eq!(a.selected.len(), expected);
        for lobe in Lobe::ALL {
            let members = tax.lobe_members(lobe);
            let picked = a.selected.iter().filter(|s| members.contains(s)).count();
            prop_assert_eq!(picked, n.min(members.len()));
        }
    }

    #[test]
    fn lobes_partition_the_known_channels(perm in Just(physionet()).prop_shuffle()) {
        let tax = classify_channels(&perm);
        let mut union: Vec<String> = Lobe::ALL.iter().flat_map(|&l| tax.lobe_members(l)).collect();
        union.sort();
        let mut known: Vec<String> = tax.channels.iter().map(|c| c.name.clone()).collect();
        known.sort();
        prop_assert_eq!(union, known);
        prop_assert_eq!(tax.channels.len() + tax.unknown.len(), 64);
    }
}

#[test]
fn sparse_totals_on_sixty_four_channels() {
    let tax = classify_channels(&physionet());
    for (n, total) in [(1, 5), (2, 10), (3, 15)] {
        for seed in 0..50 {
            assert_eq!(select_sparse(&tax, n, seed).unwrap().selected.len(), total);
        }
    }
}

#[test]
fn midline_is_exactly_the_z_names() {
    let names = physionet();
    let tax = classify_channels(&names);
    let sel = select_lobe_restricted(&tax, Region::Midline).unwrap();
    let expected: Vec<String> = names
        .iter()
        .filter(|n| is_midline_name(n) && !tax.unknown.contains(n))
        .cloned()
        .collect();
    assert_eq!(sel.selected, expected);
    assert_eq!(sel.selected.len(), 9);
}

#[test]
fn apply_keeps_selected_rows() {
    let names: Vec<String> = ["Fz", "C3", "Cz", "O1"].iter().map(|s| s.to_string()).collect();
    let set = EpochSet {
        dataset_id: "d".into(),
        channels: names.clone(),
        fs_hz: 100.0,
        class_names: vec!["a".into()],
        epochs: vec![Epoch {
            id: 0,
            data: (0..4).map(|r| vec![r as f64; 3]).collect(),
            label: 0,
            subject_id: "s".into(),
            t_start_s: 0.0,
        }],
    };
    let sel = select_lobe_restricted(&classify_channels(&names), Region::Lobe(Lobe::Central)).unwrap();
    let out = apply(&sel, &set).unwrap();
    assert_eq!(out.channels, vec!["C3".to_string(), "Cz".to_string()]);
    assert_eq!(out.epochs[0].data, vec![vec![1.0; 3], vec![2.0; 3]]);
}
