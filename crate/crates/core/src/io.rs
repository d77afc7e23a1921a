//! File formats: the TSB1 tensor container, JSONL conditions, schema JSON and
//! canonical JSON reports.
//!
//! A TSB1 file is one UTF-8 JSON header line followed by packed little-endian
//! `f32` values:
//!
//! ```text
//! {"magic":"TSB1","dtype":"f32","shape":[7,96,2],"order":"row_major","byte_order":"little"}\n
//! <7*96*2 * 4 bytes>
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{
    AttributeSchema, ConditionRecord, EmbeddingMatrix, EmbeddingRole, MetricReport, TimeSeriesTensor,
};

pub const TSB_MAGIC: &str = "TSB1";

#[derive(Debug, Deserialize)]
struct TsbHeader {
    magic: String,
    dtype: String,
    shape: Vec<usize>,
    order: String,
    byte_order: String,
}

/// A decoded container before any rank or finiteness interpretation.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl RawTensor {
    pub fn non_finite_position(&self) -> Option<usize> {
        self.data.iter().position(|v| !v.is_finite())
    }

    fn widened(&self) -> Vec<f64> {
        self.data.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn into_series(self) -> Result<TimeSeriesTensor> {
        match self.shape[..] {
            [n, l, f] => TimeSeriesTensor::new(self.widened(), n, l, f),
            _ => Err(Error::format(format!("expected a rank-3 series tensor, got shape {:?}", self.shape))),
        }
    }

    pub fn into_embeddings(self, role: EmbeddingRole) -> Result<EmbeddingMatrix> {
        match self.shape[..] {
            [n, d] => EmbeddingMatrix::new(self.widened(), n, d, role),
            _ => Err(Error::format(format!("expected a rank-2 embedding matrix, got shape {:?}", self.shape))),
        }
    }
}

/// Either container kind, decided by rank.
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Series(TimeSeriesTensor),
    Embeddings(EmbeddingMatrix),
}

pub fn encode_tsb(shape: &[usize], values: impl IntoIterator<Item = f32>) -> Vec<u8> {
    let dims = shape.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
    let header = format!(
        "{{\"magic\":\"{TSB_MAGIC}\",\"dtype\":\"f32\",\"shape\":[{dims}],\"order\":\"row_major\",\"byte_order\":\"little\"}}\n"
    );
    let count: usize = shape.iter().product();
    let mut out = Vec::with_capacity(header.len() + count * 4);
    out.extend_from_slice(header.as_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_tsb(bytes: &[u8]) -> Result<RawTensor> {
    let nl = bytes
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::format("missing header line"))?;
    let header_text =
        std::str::from_utf8(&bytes[..nl]).map_err(|_| Error::format("header is not valid UTF-8"))?;
    let header: TsbHeader =
        serde_json::from_str(header_text).map_err(|e| Error::format(format!("malformed header: {e}")))?;
    if header.magic != TSB_MAGIC {
        return Err(Error::format(format!("magic mismatch: expected {TSB_MAGIC}, found {}", header.magic)));
    }
    if header.dtype != "f32" {
        return Err(Error::format(format!("unsupported dtype '{}'", header.dtype)));
    }
    if header.order != "row_major" {
        return Err(Error::format(format!("unsupported order '{}'", header.order)));
    }
    if header.byte_order != "little" {
        return Err(Error::format(format!("unsupported byte_order '{}'", header.byte_order)));
    }
    if header.shape.is_empty() {
        return Err(Error::format("empty shape"));
    }
    let count = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format("shape overflows"))?;
    let expected = count * 4;
    let payload = &bytes[nl + 1..];
    if payload.len() < expected {
        return Err(Error::format(format!(
            "truncated payload: expected {expected} bytes, found {}",
            payload.len()
        )));
    }
    if payload.len() > expected {
        return Err(Error::format(format!(
            "trailing bytes: expected {expected} payload bytes, found {}",
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Ok(RawTensor { shape: header.shape, data })
}

/// Reads a container without checking value finiteness.
pub fn read_raw(path: impl AsRef<Path>) -> Result<RawTensor> {
    decode_tsb(&fs::read(path)?)
}

pub fn read_tensor(path: impl AsRef<Path>, role: EmbeddingRole) -> Result<Tensor> {
    let raw = read_raw(path)?;
    if raw.shape.len() == 2 {
        raw.into_embeddings(role).map(Tensor::Embeddings)
    } else {
        raw.into_series().map(Tensor::Series)
    }
}

pub fn read_series(path: impl AsRef<Path>) -> Result<TimeSeriesTensor> {
    read_raw(path)?.into_series()
}

pub fn read_embeddings(path: impl AsRef<Path>, role: EmbeddingRole) -> Result<EmbeddingMatrix> {
    read_raw(path)?.into_embeddings(role)
}

pub fn series_to_tsb(t: &TimeSeriesTensor) -> Vec<u8> {
    encode_tsb(&t.shape(), t.data().iter().map(|&v| v as f32))
}

pub fn embeddings_to_tsb(e: &EmbeddingMatrix) -> Vec<u8> {
    encode_tsb(&[e.n_samples(), e.dim()], e.data().iter().map(|&v| v as f32))
}

pub fn write_series(t: &TimeSeriesTensor, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, series_to_tsb(t))?;
    Ok(())
}

pub fn write_embeddings(e: &EmbeddingMatrix, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, embeddings_to_tsb(e))?;
    Ok(())
}

pub fn write_tensor(t: &Tensor, path: impl AsRef<Path>) -> Result<()> {
    match t {
        Tensor::Series(s) => write_series(s, path),
        Tensor::Embeddings(e) => write_embeddings(e, path),
    }
}

pub fn read_conditions(path: impl AsRef<Path>) -> Result<Vec<ConditionRecord>> {
    let file = fs::File::open(path)?;
    let mut out = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec = serde_json::from_str(&line)
            .map_err(|e| Error::format(format!("conditions line {}: {e}", lineno + 1)))?;
        out.push(rec);
    }
    Ok(out)
}

pub fn write_conditions(records: &[ConditionRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_schema(path: impl AsRef<Path>) -> Result<AttributeSchema> {
    let schema: AttributeSchema = serde_json::from_slice(&fs::read(path)?)?;
    schema.check_structure()?;
    Ok(schema)
}

pub fn write_schema(schema: &AttributeSchema, path: impl AsRef<Path>) -> Result<()> {
    write_canonical(schema, path)
}

/// Reads non-empty lines of a plain-text file.
pub fn read_lines(path: impl AsRef<Path>) -> Result<Vec<String>> {
    Ok(fs::read_to_string(path)?
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(str::to_string)
        .collect())
}

/// Canonical JSON: sorted object keys, two-space indentation, floats with 17
/// significant digits, integers verbatim. Equal values give equal bytes.
pub fn canonical_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value)?;
    let mut out = String::new();
    write_value(&v, 0, &mut out)?;
    out.push('\n');
    Ok(out)
}

pub fn write_canonical<T: Serialize + ?Sized>(value: &T, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, canonical_json(value)?)?;
    Ok(())
}

fn write_value(v: &Value, indent: usize, out: &mut String) -> Result<()> {
    match v {
        Value::Null | Value::Bool(_) | Value::String(_) => out.push_str(&v.to_string()),
        Value::Number(n) => {
            if n.is_f64() {
                let f = n.as_f64().unwrap_or(f64::NAN);
                if !f.is_finite() {
                    return Err(Error::invalid("non-finite number in report"));
                }
                out.push_str(&format_float(f));
            } else {
                out.push_str(&n.to_string());
            }
        }
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return Ok(());
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                pad(indent + 1, out);
                write_value(item, indent + 1, out)?;
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return Ok(());
            }
            let sorted: BTreeMap<&String, &Value> = map.iter().collect();
            out.push_str("{\n");
            for (i, (k, item)) in sorted.iter().enumerate() {
                pad(indent + 1, out);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(item, indent + 1, out)?;
                if i + 1 < sorted.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            pad(indent, out);
            out.push('}');
        }
    }
    Ok(())
}

fn pad(indent: usize, out: &mut String) {
    for _ in 0..indent {
        out.push_str("  ");
    }
}

/// 17 significant digits in scientific notation, e.g. `2.5000000000000000e-1`.
pub fn format_float(f: f64) -> String {
    format!("{f:.16e}")
}

/// Writes a metric report in canonical form, entries sorted by metric name.
pub fn emit_report(report: &MetricReport, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, report_json(report)?)?;
    Ok(())
}

pub fn report_json(report: &MetricReport) -> Result<String> {
    report.check()?;
    let mut sorted = report.clone();
    sorted.entries.sort_by(|a, b| a.metric.cmp(&b.metric));
    canonical_json(&sorted)
}

/// Several reports in one file, keyed by their `(dataset, model, seed)` context.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportSet {
    pub reports: Vec<MetricReport>,
}

impl ReportSet {
    pub fn merge(mut reports: Vec<MetricReport>) -> Result<Self> {
        for r in &mut reports {
            r.check()?;
            r.entries.sort_by(|a, b| a.metric.cmp(&b.metric));
        }
        reports.sort_by(|a, b| a.context.cmp(&b.context));
        for pair in reports.windows(2) {
            if pair[0].context == pair[1].context {
                return Err(Error::invalid(format!("duplicate report context {:?}", pair[0].context)));
            }
        }
        Ok(Self { reports })
    }
}

/// Accepts a single report or a merged report set.
pub fn read_reports(path: impl AsRef<Path>) -> Result<Vec<MetricReport>> {
    let v: Value = serde_json::from_slice(&fs::read(path)?)?;
    if v.get("reports").is_some() {
        Ok(serde_json::from_value::<ReportSet>(v)?.reports)
    } else {
        Ok(vec![serde_json::from_value(v)?])
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_digest(path: impl AsRef<Path>) -> Result<String> {
    Ok(sha256_hex(&fs::read(path)?))
}

/// Provenance sidecar written next to every output.
///
/// `wall_time_s` is the only field that differs between identical invocations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: BTreeMap<String, String>,
    pub seeds: Vec<u64>,
    pub input_digests: BTreeMap<String, String>,
    pub tool_version: String,
    pub wall_time_s: f64,
}

impl RunManifest {
    pub fn new(command: impl Into<String>) -> Self {
        Self {
            command: command.into(),
            flags: BTreeMap::new(),
            seeds: Vec::new(),
            input_digests: BTreeMap::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            wall_time_s: 0.0,
        }
    }

    pub fn add_input(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let p = path.as_ref();
        self.input_digests.insert(p.display().to_string(), file_digest(p)?);
        Ok(())
    }
}
