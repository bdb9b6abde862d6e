//! EDF / EDF+ reading and writing.
//!
//! The layout follows the published 256-byte fixed header, followed by one
//! 256-byte block per signal (fields interleaved by field, not by signal),
//! then `n_records` data records of little-endian `i16` samples. EDF+
//! annotation signals ("EDF Annotations") are decoded as TAL lists and kept
//! out of the sample matrix.

use std::fmt;

use log::warn;
use thiserror::Error;

use crate::preprocess::resample_signal;

const FIXED_HEADER: usize = 256;
const PER_SIGNAL_HEADER: usize = 256;
const ANNOTATION_LABEL: &str = "EDF Annotations";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EdfError {
    #[error("truncated file: expected at least {expected} bytes, got {actual}")]
    TruncatedFile { expected: usize, actual: usize },
    #[error("malformed header field `{field}`: {reason}")]
    MalformedHeader { field: &'static str, reason: String },
    #[error("unsupported variant: {0}")]
    UnsupportedVariant(String),
    #[error("signal `{label}`: value {value} outside physical range [{min}, {max}]")]
    RangeOverflow {
        label: String,
        value: f64,
        min: f64,
        max: f64,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
}

/// The fixed part of an EDF header.
#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    /// `dd.mm.yy`, carried as opaque text.
    pub start_date: String,
    /// `hh.mm.ss`, carried as opaque text.
    pub start_time: String,
    pub header_bytes: usize,
    /// The 44-byte reserved field; `EDF+C` / `EDF+D` mark EDF+ files.
    pub reserved: String,
    /// Resolved record count (a stored `-1` is replaced by the count implied
    /// by the file size).
    pub n_records: usize,
    pub record_duration_s: f64,
    pub n_signals: usize,
}

impl EdfHeader {
    pub fn is_edf_plus(&self) -> bool {
        self.reserved.starts_with("EDF+")
    }
}

impl Default for EdfHeader {
    fn default() -> Self {
        EdfHeader {
            version: "0".into(),
            patient_id: "X X X X".into(),
            recording_id: "Startdate X X X X".into(),
            start_date: "01.01.00".into(),
            start_time: "00.00.00".into(),
            header_bytes: FIXED_HEADER,
            reserved: String::new(),
            n_records: 0,
            record_duration_s: 1.0,
            n_signals: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub label: String,
    pub transducer: String,
    pub unit: String,
    pub phys_min: f64,
    pub phys_max: f64,
    pub dig_min: i32,
    pub dig_max: i32,
    pub prefilter: String,
    pub samples_per_record: usize,
    pub reserved: String,
}

impl SignalSpec {
    /// A data signal with the full 16-bit digital range.
    pub fn new(label: &str, phys_min: f64, phys_max: f64, samples_per_record: usize) -> Self {
        SignalSpec {
            label: label.to_string(),
            transducer: String::new(),
            unit: "uV".into(),
            phys_min,
            phys_max,
            dig_min: -32768,
            dig_max: 32767,
            prefilter: String::new(),
            samples_per_record,
            reserved: String::new(),
        }
    }

    /// An EDF+ annotation signal able to hold `bytes_per_record` bytes of TALs.
    pub fn annotations(bytes_per_record: usize) -> Self {
        SignalSpec {
            label: ANNOTATION_LABEL.into(),
            transducer: String::new(),
            unit: String::new(),
            phys_min: -1.0,
            phys_max: 1.0,
            dig_min: -32768,
            dig_max: 32767,
            prefilter: String::new(),
            samples_per_record: bytes_per_record.div_ceil(2),
            reserved: String::new(),
        }
    }

    pub fn is_annotation(&self) -> bool {
        self.label.trim() == ANNOTATION_LABEL
    }

    /// Digital-to-physical calibration. Written as an interpolation so that
    /// `dig_min` and `dig_max` map to `phys_min` and `phys_max` exactly.
    pub fn to_physical(&self, digital: i32) -> f64 {
        let t = (digital - self.dig_min) as f64 / (self.dig_max - self.dig_min) as f64;
        (1.0 - t) * self.phys_min + t * self.phys_max
    }

    fn to_digital(&self, physical: f64) -> Result<i16, EdfError> {
        let (lo, hi) = if self.phys_min <= self.phys_max {
            (self.phys_min, self.phys_max)
        } else {
            (self.phys_max, self.phys_min)
        };
        let tol = 1e-9 * (hi - lo);
        if !physical.is_finite() || physical < lo - tol || physical > hi + tol {
            return Err(EdfError::RangeOverflow {
                label: self.label.clone(),
                value: physical,
                min: lo,
                max: hi,
            });
        }
        let t = (physical - self.phys_min) / (self.phys_max - self.phys_min);
        let d = (t * (self.dig_max - self.dig_min) as f64 + self.dig_min as f64).round();
        Ok(d.clamp(self.dig_min as f64, self.dig_max as f64) as i16)
    }

    fn validate(&self) -> Result<(), EdfError> {
        if self.dig_min >= self.dig_max {
            return Err(malformed(
                "digital range",
                format!("dig_min {} >= dig_max {}", self.dig_min, self.dig_max),
            ));
        }
        if self.dig_min < i16::MIN as i32 || self.dig_max > i16::MAX as i32 {
            return Err(malformed("digital range", "outside 16-bit range".into()));
        }
        if self.phys_min == self.phys_max {
            return Err(malformed(
                "physical range",
                format!("phys_min == phys_max == {}", self.phys_min),
            ));
        }
        if self.samples_per_record == 0 {
            return Err(malformed("samples per record", "must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub onset_s: f64,
    pub duration_s: f64,
    pub label: String,
}

/// A multichannel recording in physical units, all channels at one rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Vec<String>,
    pub fs_hz: f64,
    /// One row per channel.
    pub data: Vec<Vec<f64>>,
    pub annotations: Vec<Annotation>,
}

impl Recording {
    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs_hz
    }
}

/// Result of parsing one EDF file.
#[derive(Debug, Clone)]
pub struct EdfFile {
    pub header: EdfHeader,
    /// Every signal in the file, annotation signals included.
    pub signals: Vec<SignalSpec>,
    pub recording: Recording,
    /// Raw digital samples of the data signals at their native rates.
    pub digital: Vec<Vec<i16>>,
    pub warnings: Vec<String>,
}

impl fmt::Display for EdfHeader {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} signals, {} records of {} s",
            self.n_signals, self.n_records, self.record_duration_s
        )
    }
}

fn malformed(field: &'static str, reason: String) -> EdfError {
    EdfError::MalformedHeader { field, reason }
}

struct FieldReader<'a> {
    bytes: &'a [u8],
    pos: usize,
    warnings: Vec<String>,
}

impl<'a> FieldReader<'a> {
    fn raw(&mut self, len: usize) -> &'a [u8] {
        let out = &self.bytes[self.pos..self.pos + len];
        self.pos += len;
        out
    }

    /// Text field; non-printable-ASCII bytes become '?' and are flagged.
    fn text(&mut self, field: &'static str, len: usize) -> String {
        let raw = self.raw(len);
        let mut bad = false;
        let s: String = raw
            .iter()
            .map(|&b| {
                if (0x20..=0x7e).contains(&b) {
                    b as char
                } else {
                    bad = true;
                    '?'
                }
            })
            .collect();
        if bad {
            self.warnings.push(format!("non-ASCII bytes replaced in `{field}`"));
        }
        s.trim_end().to_string()
    }

    fn numeric_str(&mut self, field: &'static str, len: usize) -> Result<&'a str, EdfError> {
        let raw = self.raw(len);
        if !raw.iter().all(|b| (0x20..=0x7e).contains(b)) {
            return Err(malformed(field, "non-ASCII byte in numeric field".into()));
        }
        Ok(std::str::from_utf8(raw).expect("ascii").trim())
    }

    fn int(&mut self, field: &'static str, len: usize) -> Result<i64, EdfError> {
        let s = self.numeric_str(field, len)?;
        s.parse::<i64>()
            .map_err(|_| malformed(field, format!("not an integer: {s:?}")))
    }

    fn float(&mut self, field: &'static str, len: usize) -> Result<f64, EdfError> {
        let s = self.numeric_str(field, len)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(malformed(field, format!("not a number: {s:?}"))),
        }
    }
}

/// Parse a complete EDF/EDF+ byte stream.
///
/// Data signals with differing sample rates are resampled to the highest
/// rate present so the recording is rectangular.
pub fn parse_edf(bytes: &[u8]) -> Result<EdfFile, EdfError> {
    if bytes.len() < FIXED_HEADER {
        return Err(EdfError::TruncatedFile {
            expected: FIXED_HEADER,
            actual: bytes.len(),
        });
    }
    if bytes[0] == 0xff && bytes[1..8] == *b"BIOSEMI" {
        return Err(EdfError::UnsupportedVariant("BDF (24-bit)".into()));
    }

    let mut r = FieldReader {
        bytes,
        pos: 0,
        warnings: Vec::new(),
    };
    let version = r.text("version", 8);
    let patient_id = r.text("patient id", 80);
    let recording_id = r.text("recording id", 80);
    let start_date = r.text("start date", 8);
    let start_time = r.text("start time", 8);
    let header_bytes = r.int("header bytes", 8)?;
    let reserved = r.text("reserved", 44);
    let n_records_raw = r.int("number of records", 8)?;
    let record_duration_s = r.float("record duration", 8)?;
    let n_signals = r.int("number of signals", 4)?;

    if n_signals < 0 {
        return Err(malformed("number of signals", format!("negative: {n_signals}")));
    }
    let n_signals = n_signals as usize;
    let expected_header = FIXED_HEADER + PER_SIGNAL_HEADER * n_signals;
    if header_bytes != expected_header as i64 {
        return Err(malformed(
            "header bytes",
            format!("{header_bytes} != 256 + 256 * {n_signals}"),
        ));
    }
    if record_duration_s <= 0.0 {
        return Err(malformed(
            "record duration",
            format!("must be > 0, got {record_duration_s}"),
        ));
    }
    if n_records_raw < -1 {
        return Err(malformed("number of records", format!("{n_records_raw}")));
    }
    if bytes.len() < expected_header {
        return Err(EdfError::TruncatedFile {
            expected: expected_header,
            actual: bytes.len(),
        });
    }

    let ns = n_signals;
    let labels: Vec<String> = (0..ns).map(|_| r.text("label", 16)).collect();
    let transducers: Vec<String> = (0..ns).map(|_| r.text("transducer", 80)).collect();
    let units: Vec<String> = (0..ns).map(|_| r.text("physical dimension", 8)).collect();
    let phys_mins = (0..ns)
        .map(|_| r.float("physical minimum", 8))
        .collect::<Result<Vec<_>, _>>()?;
    let phys_maxs = (0..ns)
        .map(|_| r.float("physical maximum", 8))
        .collect::<Result<Vec<_>, _>>()?;
    let dig_mins = (0..ns)
        .map(|_| r.int("digital minimum", 8))
        .collect::<Result<Vec<_>, _>>()?;
    let dig_maxs = (0..ns)
        .map(|_| r.int("digital maximum", 8))
        .collect::<Result<Vec<_>, _>>()?;
    let prefilters: Vec<String> = (0..ns).map(|_| r.text("prefiltering", 80)).collect();
    let sprs = (0..ns)
        .map(|_| r.int("samples per record", 8))
        .collect::<Result<Vec<_>, _>>()?;
    let sig_reserved: Vec<String> = (0..ns).map(|_| r.text("signal reserved", 32)).collect();

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if sprs[i] < 1 {
            return Err(malformed("samples per record", format!("signal {i}: {}", sprs[i])));
        }
        let spec = SignalSpec {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            unit: units[i].clone(),
            phys_min: phys_mins[i],
            phys_max: phys_maxs[i],
            dig_min: i32::try_from(dig_mins[i])
                .map_err(|_| malformed("digital minimum", format!("{}", dig_mins[i])))?,
            dig_max: i32::try_from(dig_maxs[i])
                .map_err(|_| malformed("digital maximum", format!("{}", dig_maxs[i])))?,
            prefilter: prefilters[i].clone(),
            samples_per_record: sprs[i] as usize,
            reserved: sig_reserved[i].clone(),
        };
        if !spec.is_annotation() {
            spec.validate()?;
        }
        signals.push(spec);
    }
    let mut warnings = std::mem::take(&mut r.warnings);

    let record_bytes: usize = signals.iter().map(|s| 2 * s.samples_per_record).sum();
    let body = bytes.len() - expected_header;
    let n_records = if n_records_raw == -1 {
        if record_bytes == 0 {
            0
        } else {
            if !body.is_multiple_of(record_bytes) {
                warnings.push(format!(
                    "{} trailing bytes after last whole record",
                    body % record_bytes
                ));
            }
            body / record_bytes
        }
    } else {
        let n = n_records_raw as usize;
        let needed = expected_header + n * record_bytes;
        if bytes.len() < needed {
            return Err(EdfError::TruncatedFile {
                expected: needed,
                actual: bytes.len(),
            });
        }
        if bytes.len() > needed {
            warnings.push(format!("{} trailing bytes ignored", bytes.len() - needed));
        }
        n
    };

    let data_idx: Vec<usize> = (0..ns).filter(|&i| !signals[i].is_annotation()).collect();
    let mut digital: Vec<Vec<i16>> = data_idx
        .iter()
        .map(|&i| Vec::with_capacity(n_records * signals[i].samples_per_record))
        .collect();
    let mut annotations = Vec::new();

    let mut pos = expected_header;
    for _ in 0..n_records {
        let mut data_slot = 0;
        for spec in &signals {
            let len = 2 * spec.samples_per_record;
            let chunk = &bytes[pos..pos + len];
            pos += len;
            if spec.is_annotation() {
                parse_tals(chunk, &mut annotations, &mut warnings);
            } else {
                digital[data_slot].extend(chunk.chunks_exact(2).map(|c| i16::from_le_bytes([c[0], c[1]])));
                data_slot += 1;
            }
        }
    }

    let max_spr = data_idx
        .iter()
        .map(|&i| signals[i].samples_per_record)
        .max()
        .unwrap_or(1);
    let fs_hz = max_spr as f64 / record_duration_s;
    let data: Vec<Vec<f64>> = data_idx
        .iter()
        .zip(&digital)
        .map(|(&i, dig)| {
            let spec = &signals[i];
            let phys: Vec<f64> = dig.iter().map(|&d| spec.to_physical(d as i32)).collect();
            if spec.samples_per_record == max_spr {
                phys
            } else {
                resample_signal(&phys, max_spr, spec.samples_per_record)
            }
        })
        .collect();
    if data_idx.iter().any(|&i| signals[i].samples_per_record != max_spr) {
        warnings.push(format!("mixed sampling rates resampled to {fs_hz} Hz"));
    }

    for w in &warnings {
        warn!("edf: {w}");
    }

    let subject_id = patient_id.split_whitespace().next().unwrap_or("").to_string();
    let header = EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes: expected_header,
        reserved,
        n_records,
        record_duration_s,
        n_signals: ns,
    };
    let recording = Recording {
        subject_id,
        channels: data_idx.iter().map(|&i| signals[i].label.clone()).collect(),
        fs_hz,
        data,
        annotations,
    };
    Ok(EdfFile {
        header,
        signals,
        recording,
        digital,
        warnings,
    })
}

fn parse_tals(chunk: &[u8], out: &mut Vec<Annotation>, warnings: &mut Vec<String>) {
    for tal in chunk.split(|&b| b == 0).filter(|t| !t.is_empty()) {
        let mut parts = tal.split(|&b| b == 0x14);
        let Some(time) = parts.next() else { continue };
        let mut time = time.splitn(2, |&b| b == 0x15);
        let onset = time
            .next()
            .and_then(|b| std::str::from_utf8(b).ok())
            .and_then(|s| s.parse::<f64>().ok());
        let duration = time
            .next()
            .and_then(|b| std::str::from_utf8(b).ok())
            .and_then(|s| s.parse::<f64>().ok())
            .unwrap_or(0.0);
        let Some(onset) = onset else {
            warnings.push("unparseable TAL onset skipped".into());
            continue;
        };
        for text in parts.filter(|p| !p.is_empty()) {
            out.push(Annotation {
                onset_s: onset,
                duration_s: duration,
                label: String::from_utf8_lossy(text).into_owned(),
            });
        }
    }
}

fn put_text(out: &mut Vec<u8>, s: &str, width: usize) {
    let mut bytes: Vec<u8> = s
        .chars()
        .map(|c| if (' '..='~').contains(&c) { c as u8 } else { b'?' })
        .take(width)
        .collect();
    bytes.resize(width, b' ');
    out.extend_from_slice(&bytes);
}

/// Shortest decimal rendering of `v` fitting in `width` characters.
fn format_number(v: f64, width: usize) -> Option<String> {
    let s = format!("{v}");
    if s.len() <= width {
        return Some(s);
    }
    (0..width).rev().find_map(|p| {
        let s = format!("{v:.p$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        (s.len() <= width).then_some(s)
    })
}

fn put_number(out: &mut Vec<u8>, field: &'static str, v: f64, width: usize) -> Result<(), EdfError> {
    let s =
        format_number(v, width).ok_or_else(|| malformed(field, format!("{v} does not fit in {width} characters")))?;
    put_text(out, &s, width);
    Ok(())
}

fn encode_tal(onset: f64, duration: Option<f64>, texts: &[&str]) -> Vec<u8> {
    let mut tal = Vec::new();
    tal.extend_from_slice(if onset >= 0.0 { b"+" } else { b"" });
    tal.extend_from_slice(format!("{onset}").as_bytes());
    if let Some(d) = duration.filter(|d| *d > 0.0) {
        tal.push(0x15);
        tal.extend_from_slice(format!("{d}").as_bytes());
    }
    tal.push(0x14);
    if texts.is_empty() {
        tal.push(0x14);
    }
    for t in texts {
        tal.extend_from_slice(t.as_bytes());
        tal.push(0x14);
    }
    tal.push(0);
    tal
}

/// Serialize a recording. Data signals in `specs` are matched in order to
/// the rows of `recording.data`; an "EDF Annotations" signal, if present,
/// receives a timekeeping TAL per record plus the recording's annotations
/// (each placed in the record containing its onset).
pub fn write_edf(header: &EdfHeader, specs: &[SignalSpec], recording: &Recording) -> Result<Vec<u8>, EdfError> {
    let data_specs: Vec<&SignalSpec> = specs.iter().filter(|s| !s.is_annotation()).collect();
    if data_specs.len() != recording.data.len() {
        return Err(EdfError::ShapeMismatch(format!(
            "{} data signals but {} recording rows",
            data_specs.len(),
            recording.data.len()
        )));
    }
    for s in &data_specs {
        s.validate()?;
    }
    if !(header.record_duration_s > 0.0) {
        return Err(malformed(
            "record duration",
            format!("must be > 0, got {}", header.record_duration_s),
        ));
    }

    let n_records = match data_specs.first() {
        None => header.n_records,
        Some(first) => {
            let n = recording.data[0].len() / first.samples_per_record;
            for (spec, row) in data_specs.iter().zip(&recording.data) {
                if row.len() != n * spec.samples_per_record {
                    return Err(EdfError::ShapeMismatch(format!(
                        "signal `{}` has {} samples, expected {} records x {}",
                        spec.label,
                        row.len(),
                        n,
                        spec.samples_per_record
                    )));
                }
            }
            n
        }
    };

    let digital: Vec<Vec<i16>> = data_specs
        .iter()
        .zip(&recording.data)
        .map(|(spec, row)| row.iter().map(|&v| spec.to_digital(v)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<_, _>>()?;

    let ns = specs.len();
    let mut out = Vec::with_capacity(FIXED_HEADER + PER_SIGNAL_HEADER * ns);
    put_text(&mut out, &header.version, 8);
    put_text(&mut out, &header.patient_id, 80);
    put_text(&mut out, &header.recording_id, 80);
    put_text(&mut out, &header.start_date, 8);
    put_text(&mut out, &header.start_time, 8);
    put_text(&mut out, &(FIXED_HEADER + PER_SIGNAL_HEADER * ns).to_string(), 8);
    put_text(&mut out, &header.reserved, 44);
    put_text(&mut out, &n_records.to_string(), 8);
    put_number(&mut out, "record duration", header.record_duration_s, 8)?;
    put_text(&mut out, &ns.to_string(), 4);
    for s in specs {
        put_text(&mut out, &s.label, 16);
    }
    for s in specs {
        put_text(&mut out, &s.transducer, 80);
    }
    for s in specs {
        put_text(&mut out, &s.unit, 8);
    }
    for s in specs {
        put_number(&mut out, "physical minimum", s.phys_min, 8)?;
    }
    for s in specs {
        put_number(&mut out, "physical maximum", s.phys_max, 8)?;
    }
    for s in specs {
        put_text(&mut out, &s.dig_min.to_string(), 8);
    }
    for s in specs {
        put_text(&mut out, &s.dig_max.to_string(), 8);
    }
    for s in specs {
        put_text(&mut out, &s.prefilter, 80);
    }
    for s in specs {
        put_text(&mut out, &s.samples_per_record.to_string(), 8);
    }
    for s in specs {
        put_text(&mut out, &s.reserved, 32);
    }

    for rec in 0..n_records {
        let t0 = rec as f64 * header.record_duration_s;
        let t1 = t0 + header.record_duration_s;
        let mut data_slot = 0;
        for spec in specs {
            if spec.is_annotation() {
                let capacity = 2 * spec.samples_per_record;
                let mut block = encode_tal(t0, None, &[]);
                for a in recording
                    .annotations
                    .iter()
                    .filter(|a| a.onset_s >= t0 && (a.onset_s < t1 || (rec + 1 == n_records && a.onset_s >= t1)))
                {
                    block.extend(encode_tal(a.onset_s, Some(a.duration_s), &[a.label.as_str()]));
                }
                if block.len() > capacity {
                    return Err(EdfError::ShapeMismatch(format!(
                        "annotations for record {rec} need {} bytes, signal holds {capacity}",
                        block.len()
                    )));
                }
                block.resize(capacity, 0);
                out.extend(block);
            } else {
                let spr = spec.samples_per_record;
                for &d in &digital[data_slot][rec * spr..(rec + 1) * spr] {
                    out.extend_from_slice(&d.to_le_bytes());
                }
                data_slot += 1;
            }
        }
    }
    Ok(out)
}
