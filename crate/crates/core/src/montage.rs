//! Channel-reduction protocols: a fixed number of channels per cortical lobe
//! (sparse montage) or all channels of a single region (lobe-restricted).

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::EpochSet;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MontageError {
    #[error("unknown channel `{0}`")]
    UnknownChannel(String),
    #[error("no channels in {0}")]
    LobeEmpty(String),
    #[error("channel `{0}` not present in epochs")]
    MissingChannel(String),
    #[error("invalid selection: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lobe {
    Frontal,
    Central,
    Temporal,
    Parietal,
    Occipital,
}

impl Lobe {
    pub const ALL: [Lobe; 5] = [
        Lobe::Frontal,
        Lobe::Central,
        Lobe::Temporal,
        Lobe::Parietal,
        Lobe::Occipital,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Lobe::Frontal => "frontal",
            Lobe::Central => "central",
            Lobe::Temporal => "temporal",
            Lobe::Parietal => "parietal",
            Lobe::Occipital => "occipital",
        }
    }
}

impl fmt::Display for Lobe {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Lobe {
    type Err = MontageError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Lobe::ALL
            .into_iter()
            .find(|l| l.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| MontageError::Invalid(format!("unknown lobe `{s}`")))
    }
}

/// A restriction target: one lobe, or the midline flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Region {
    Lobe(Lobe),
    Midline,
}

impl fmt::Display for Region {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Region::Lobe(l) => l.fmt(f),
            Region::Midline => f.write_str("midline"),
        }
    }
}

impl FromStr for Region {
    type Err = MontageError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("midline") {
            Ok(Region::Midline)
        } else {
            s.parse().map(Region::Lobe)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelInfo {
    pub name: String,
    pub lobe: Lobe,
    pub midline: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChannelTaxonomy {
    /// Classified channels in source order.
    pub channels: Vec<ChannelInfo>,
    /// Names no rule matched; excluded from every selection.
    pub unknown: Vec<String>,
}

/// Reduce a label to its leading electrode: drop an `EEG ` prefix, trailing
/// dots (PhysioNet style), and anything after a bipolar/reference `-`.
fn electrode(name: &str) -> String {
    let mut s = name.trim();
    if s.len() > 4 && s[..4].eq_ignore_ascii_case("eeg ") {
        s = s[4..].trim_start();
    }
    let s = s.split('-').next().unwrap_or("").trim().trim_end_matches('.');
    s.to_ascii_lowercase()
}

/// Classify one 10-20 / 10-10 channel name by its letter prefix.
pub fn classify_channel(name: &str) -> Result<ChannelInfo, MontageError> {
    let e = electrode(name);
    let split = e.find(|c: char| !c.is_ascii_alphabetic()).unwrap_or(e.len());
    let (letters, rest) = e.split_at(split);
    let (prefix, midline) = match letters.strip_suffix('z') {
        Some(p) if rest.is_empty() && !p.is_empty() => (p, true),
        _ if !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()) => (letters, false),
        _ => return Err(MontageError::UnknownChannel(name.to_string())),
    };
    let lobe = match prefix {
        "fp" | "af" | "f" => Lobe::Frontal,
        "fc" | "c" => Lobe::Central,
        "ft" | "t" | "tp" => Lobe::Temporal,
        "cp" | "p" => Lobe::Parietal,
        "po" | "o" => Lobe::Occipital,
        _ => return Err(MontageError::UnknownChannel(name.to_string())),
    };
    Ok(ChannelInfo {
        name: name.to_string(),
        lobe,
        midline,
    })
}

/// Explicit classification for nonstandard names.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelOverride {
    pub lobe: Lobe,
    #[serde(default)]
    pub midline: bool,
}

pub fn classify_channels(names: &[String]) -> ChannelTaxonomy {
    classify_channels_with(names, &BTreeMap::new())
}

pub fn classify_channels_with(names: &[String], overrides: &BTreeMap<String, ChannelOverride>) -> ChannelTaxonomy {
    let mut tax = ChannelTaxonomy::default();
    for name in names {
        if let Some(o) = overrides.get(name) {
            tax.channels.push(ChannelInfo {
                name: name.clone(),
                lobe: o.lobe,
                midline: o.midline,
            });
            continue;
        }
        match classify_channel(name) {
            Ok(info) => tax.channels.push(info),
            Err(_) => tax.unknown.push(name.clone()),
        }
    }
    tax
}

impl ChannelTaxonomy {
    /// Channel names of one lobe, sorted.
    pub fn lobe_members(&self, lobe: Lobe) -> Vec<String> {
        let mut v: Vec<String> = self
            .channels
            .iter()
            .filter(|c| c.lobe == lobe)
            .map(|c| c.name.clone())
            .collect();
        v.sort();
        v
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMode {
    Sparse(usize),
    LobeRestricted(Region),
}

impl SelectionMode {
    /// Short tag used in result tables: `sparse2`, `lobe:midline`.
    pub fn tag(&self) -> String {
        match self {
            SelectionMode::Sparse(n) => format!("sparse{n}"),
            SelectionMode::LobeRestricted(r) => format!("lobe:{r}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MontageSelection {
    pub mode: SelectionMode,
    pub selected: Vec<String>,
    pub seed: u64,
}

/// `n_per_lobe` channels from every lobe (all of them when a lobe has fewer),
/// drawn uniformly without replacement from the lobe's name-sorted members.
/// Output is ordered by lobe, then by name.
pub fn select_sparse(tax: &ChannelTaxonomy, n_per_lobe: usize, seed: u64) -> Result<MontageSelection, MontageError> {
    if n_per_lobe == 0 {
        return Err(MontageError::Invalid("channels per lobe must be >= 1".into()));
    }
    let empty: Vec<&str> = Lobe::ALL
        .iter()
        .filter(|l| tax.channels.iter().all(|c| c.lobe != **l))
        .map(|l| l.name())
        .collect();
    if !empty.is_empty() {
        return Err(MontageError::LobeEmpty(empty.join(", ")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut selected = Vec::new();
    for lobe in Lobe::ALL {
        let members = tax.lobe_members(lobe);
        let k = n_per_lobe.min(members.len());
        let mut idx = sample(&mut rng, members.len(), k).into_vec();
        idx.sort_unstable();
        selected.extend(idx.into_iter().map(|i| members[i].clone()));
    }
    Ok(MontageSelection {
        mode: SelectionMode::Sparse(n_per_lobe),
        selected,
        seed,
    })
}

/// Every channel of `region`, in source order.
pub fn select_lobe_restricted(tax: &ChannelTaxonomy, region: Region) -> Result<MontageSelection, MontageError> {
    let selected: Vec<String> = tax
        .channels
        .iter()
        .filter(|c| match region {
            Region::Midline => c.midline,
            Region::Lobe(l) => c.lobe == l,
        })
        .map(|c| c.name.clone())
        .collect();
    if selected.is_empty() {
        return Err(MontageError::LobeEmpty(region.to_string()));
    }
    Ok(MontageSelection {
        mode: SelectionMode::LobeRestricted(region),
        selected,
        seed: 0,
    })
}

/// Keep only the selected channel rows, in selection order.
pub fn apply(selection: &MontageSelection, set: &EpochSet) -> Result<EpochSet, MontageError> {
    let rows: Vec<usize> = selection
        .selected
        .iter()
        .map(|name| {
            set.channels
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| MontageError::MissingChannel(name.clone()))
        })
        .collect::<Result<_, _>>()?;
    let epochs = set
        .epochs
        .iter()
        .map(|e| {
            let mut e2 = e.clone();
            e2.data = rows.iter().map(|&r| e.data[r].clone()).collect();
            e2
        })
        .collect();
    let mut out = set.with_epochs(epochs);
    out.channels = selection.selected.clone();
    Ok(out)
}

/// The 64 electrode labels of the PhysioNet EEG Motor Movement/Imagery
/// recordings, with their trailing-dot padding.
pub const PHYSIONET_MI_64: [&str; 64] = [
    "Fc5.", "Fc3.", "Fc1.", "Fcz.", "Fc2.", "Fc4.", "Fc6.", "C5..", "C3..", "C1..", "Cz..", "C2..", "C4..", "C6..",
    "Cp5.", "Cp3.", "Cp1.", "Cpz.", "Cp2.", "Cp4.", "Cp6.", "Fp1.", "Fpz.", "Fp2.", "Af7.", "Af3.", "Afz.", "Af4.",
    "Af8.", "F7..", "F5..", "F3..", "F1..", "Fz..", "F2..", "F4..", "F6..", "F8..", "Ft7.", "Ft8.", "T7..", "T8..",
    "T9..", "T10.", "Tp7.", "Tp8.", "P7..", "P5..", "P3..", "P1..", "Pz..", "P2..", "P4..", "P6..", "P8..", "Po7.",
    "Po3.", "Poz.", "Po4.", "Po8.", "O1..", "Oz..", "O2..", "Iz..",
];

#[cfg(test)]
mod tests {
    use super::*;

    fn names(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn single_channel_rules() {
        let cz = classify_channel("Cz").unwrap();
        assert_eq!((cz.lobe, cz.midline), (Lobe::Central, true));
        let fp1 = classify_channel("Fp1").unwrap();
        assert_eq!((fp1.lobe, fp1.midline), (Lobe::Frontal, false));
        assert_eq!(classify_channel("X7"), Err(MontageError::UnknownChannel("X7".into())));
        assert_eq!(classify_channel("FCz").unwrap().lobe, Lobe::Central);
        assert_eq!(classify_channel("Tp7.").unwrap().lobe, Lobe::Temporal);
        assert_eq!(classify_channel("EEG Fpz-Cz").unwrap().lobe, Lobe::Frontal);
        assert_eq!(classify_channel("EEG FP1-REF").unwrap().lobe, Lobe::Frontal);
        assert!(classify_channel("Iz..").is_err());
        assert!(classify_channel("A1").is_err());
        assert!(classify_channel("z").is_err());
    }

    #[test]
    fn sleep_montage_is_missing_lobes() {
        let tax = classify_channels(&names(&["Fpz-Cz", "Pz-Oz"]));
        match select_sparse(&tax, 1, 0) {
            Err(MontageError::LobeEmpty(msg)) => assert!(msg.contains("temporal")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn midline_and_restriction() {
        let tax = classify_channels(&names(&["Fz", "C3", "Cz", "Pz", "C4", "Oz"]));
        let mid = select_lobe_restricted(&tax, Region::Midline).unwrap();
        assert_eq!(mid.selected, names(&["Fz", "Cz", "Pz", "Oz"]));
        let tax2 = classify_channels(&names(&["C3", "C4"]));
        assert!(matches!(
            select_lobe_restricted(&tax2, Region::Lobe(Lobe::Frontal)),
            Err(MontageError::LobeEmpty(_))
        ));
    }

    #[test]
    fn sparse_counts_on_physionet() {
        let tax = classify_channels(&names(&PHYSIONET_MI_64));
        assert_eq!(tax.unknown, names(&["Iz.."]));
        for (n, total) in [(1, 5), (2, 10), (3, 15)] {
            let sel = select_sparse(&tax, n, 7).unwrap();
            assert_eq!(sel.selected.len(), total);
            assert_eq!(select_sparse(&tax, n, 7).unwrap(), sel);
        }
    }

    #[test]
    fn region_parsing() {
        assert_eq!("midline".parse::<Region>().unwrap(), Region::Midline);
        assert_eq!("Frontal".parse::<Region>().unwrap(), Region::Lobe(Lobe::Frontal));
        assert!("nose".parse::<Region>().is_err());
    }
}
