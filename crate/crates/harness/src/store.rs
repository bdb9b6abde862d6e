//! Epoch store: preprocessed epochs on disk, shared with the embedding
//! bridge so preprocessing has a single implementation.
//!
//! ```text
//! "EPO1" | u32 version=1 | u32 meta_len | meta_len bytes of JSON
//! per epoch, in meta order: channels x samples f32 little-endian, row-major
//! ```

use eegeval_core::preprocess::{Epoch, EpochSet};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"EPO1";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMeta {
    pub id: u64,
    pub label: usize,
    pub subject_id: String,
    pub t_start_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreMeta {
    pub dataset_id: String,
    pub channels: Vec<String>,
    pub fs_hz: f64,
    pub class_names: Vec<String>,
    pub n_samples: usize,
    pub epochs: Vec<EpochMeta>,
    /// Transforms applied per source file.
    #[serde(default)]
    pub log: Vec<String>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Data(format!("epoch store: {}", msg.into()))
}

pub fn encode(set: &EpochSet, log: &[String]) -> Result<Vec<u8>> {
    set.validate()?;
    let meta = StoreMeta {
        dataset_id: set.dataset_id.clone(),
        channels: set.channels.clone(),
        fs_hz: set.fs_hz,
        class_names: set.class_names.clone(),
        n_samples: set.n_samples(),
        epochs: set
            .epochs
            .iter()
            .map(|e| EpochMeta {
                id: e.id,
                label: e.label,
                subject_id: e.subject_id.clone(),
                t_start_s: e.t_start_s,
            })
            .collect(),
        log: log.to_vec(),
    };
    let json = serde_json::to_vec(&meta)?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * set.epochs.len() * set.channels.len() * meta.n_samples);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(
        &u32::try_from(json.len())
            .map_err(|_| bad("metadata too large"))?
            .to_le_bytes(),
    );
    out.extend_from_slice(&json);
    for e in &set.epochs {
        for v in e.data.iter().flatten() {
            out.extend_from_slice(&(*v as f32).to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(EpochSet, StoreMeta)> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(bad("missing EPO1 magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    let meta_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let body = 12 + meta_len;
    if bytes.len() < body {
        return Err(bad("truncated metadata"));
    }
    let meta: StoreMeta = serde_json::from_slice(&bytes[12..body]).map_err(|e| bad(e.to_string()))?;
    let (c, t) = (meta.channels.len(), meta.n_samples);
    let expected = body + 4 * meta.epochs.len() * c * t;
    if bytes.len() != expected {
        return Err(bad(format!("expected {expected} bytes, found {}", bytes.len())));
    }
    let mut values = bytes[body..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")) as f64);
    let epochs = meta
        .epochs
        .iter()
        .map(|m| Epoch {
            id: m.id,
            data: (0..c).map(|_| values.by_ref().take(t).collect()).collect(),
            label: m.label,
            subject_id: m.subject_id.clone(),
            t_start_s: m.t_start_s,
        })
        .collect();
    let set = EpochSet {
        dataset_id: meta.dataset_id.clone(),
        channels: meta.channels.clone(),
        fs_hz: meta.fs_hz,
        class_names: meta.class_names.clone(),
        epochs,
    };
    set.validate()?;
    Ok((set, meta))
}
