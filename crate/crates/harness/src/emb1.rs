//! EMB1 embedding files: a fixed little-endian binary body plus a JSON
//! sidecar (`<file>.json`) carrying per-record metadata.
//!
//! ```text
//! "EMB1" | u32 version=1 | u32 n | u32 d | u32 K
//! n x ( u64 epoch_id | i32 label or -1 | d x f32 )
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{read_file, write_file, HarnessError, Result};

pub const MAGIC: &[u8; 4] = b"EMB1";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq)]
pub struct Emb1Record {
    pub epoch_id: u64,
    pub label: Option<usize>,
    pub features: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Emb1 {
    pub d: usize,
    pub n_classes: usize,
    pub records: Vec<Emb1Record>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Emb1Meta {
    pub model_tag: String,
    pub dataset_id: String,
    pub subject_ids: Vec<String>,
    pub t_start_s: Vec<f64>,
    pub window_s: f64,
    /// Channels the backbone saw, when exported from a montage selection.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
}

fn bad(msg: impl Into<String>) -> HarnessError {
    HarnessError::Data(format!("EMB1: {}", msg.into()))
}

impl Emb1 {
    pub fn encode(&self) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(HEADER_LEN + self.records.len() * (12 + 4 * self.d));
        out.extend_from_slice(MAGIC);
        for v in [VERSION as usize, self.records.len(), self.d, self.n_classes] {
            let v = u32::try_from(v).map_err(|_| bad(format!("{v} does not fit in u32")))?;
            out.extend_from_slice(&v.to_le_bytes());
        }
        for r in &self.records {
            if r.features.len() != self.d {
                return Err(bad(format!(
                    "epoch {} has {} features, expected {}",
                    r.epoch_id,
                    r.features.len(),
                    self.d
                )));
            }
            out.extend_from_slice(&r.epoch_id.to_le_bytes());
            let label = match r.label {
                Some(l) => i32::try_from(l).map_err(|_| bad(format!("label {l} too large")))?,
                None => -1,
            };
            out.extend_from_slice(&label.to_le_bytes());
            for f in &r.features {
                out.extend_from_slice(&f.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Emb1> {
        if bytes.len() < HEADER_LEN || &bytes[..4] != MAGIC {
            return Err(bad("missing EMB1 magic"));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
        let version = u32_at(4);
        if version != VERSION as usize {
            return Err(bad(format!("unsupported version {version}")));
        }
        let (n, d, k) = (u32_at(8), u32_at(12), u32_at(16));
        if d == 0 {
            return Err(bad("d must be >= 1"));
        }
        let rec_len = 12 + 4 * d;
        let expected = HEADER_LEN + n * rec_len;
        if bytes.len() != expected {
            return Err(bad(format!(
                "expected {expected} bytes for n={n} d={d}, found {}",
                bytes.len()
            )));
        }
        let mut seen = HashSet::with_capacity(n);
        let mut records = Vec::with_capacity(n);
        for chunk in bytes[HEADER_LEN..].chunks_exact(rec_len) {
            let epoch_id = u64::from_le_bytes(chunk[..8].try_into().expect("8 bytes"));
            let raw = i32::from_le_bytes(chunk[8..12].try_into().expect("4 bytes"));
            let label = match raw {
                -1 => None,
                l if l >= 0 && (l as usize) < k => Some(l as usize),
                l => return Err(bad(format!("epoch {epoch_id}: label {l} outside [0, {k}) and not -1"))),
            };
            let features: Vec<f32> = chunk[12..]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            if features.iter().any(|f| !f.is_finite()) {
                return Err(bad(format!("epoch {epoch_id}: non-finite feature")));
            }
            if !seen.insert(epoch_id) {
                return Err(bad(format!("duplicate epoch id {epoch_id}")));
            }
            records.push(Emb1Record {
                epoch_id,
                label,
                features,
            });
        }
        Ok(Emb1 {
            d,
            n_classes: k,
            records,
        })
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

pub fn write(path: &Path, emb: &Emb1, meta: &Emb1Meta) -> Result<()> {
    if meta.subject_ids.len() != emb.records.len() || meta.t_start_s.len() != emb.records.len() {
        return Err(bad("sidecar lists must have one entry per record"));
    }
    write_file(path, &emb.encode()?)?;
    let mut json = serde_json::to_vec_pretty(meta)?;
    json.push(b'\n');
    write_file(&sidecar_path(path), &json)
}

/// Read an EMB1 file and its sidecar.
pub fn read(path: &Path) -> Result<(Emb1, Emb1Meta)> {
    let emb = Emb1::decode(&read_file(path)?).map_err(|e| e.context(path.display()))?;
    let side = sidecar_path(path);
    let meta: Emb1Meta = serde_json::from_slice(&read_file(&side)?)
        .map_err(|e| HarnessError::Data(format!("{}: {e}", side.display())))?;
    if meta.subject_ids.len() != emb.records.len() || meta.t_start_s.len() != emb.records.len() {
        return Err(bad(format!(
            "{}: sidecar lists do not match {} records",
            side.display(),
            emb.records.len()
        )));
    }
    Ok((emb, meta))
}
