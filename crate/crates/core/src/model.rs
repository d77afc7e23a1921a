//! Shared data model: series batches, embeddings, conditions, schemas and reports.
//!
//! Position `i` in every container refers to the same sample. Files store
//! 32-bit floats; everything in memory is widened to `f64`.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A batch of series with shape `(n_samples, length, n_features)`, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTensor {
    data: Vec<f64>,
    n_samples: usize,
    length: usize,
    n_features: usize,
}

impl TimeSeriesTensor {
    pub fn new(data: Vec<f64>, n_samples: usize, length: usize, n_features: usize) -> Result<Self> {
        if length == 0 || n_features == 0 {
            return Err(Error::shape("length and n_features must be positive"));
        }
        let expected = n_samples
            .checked_mul(length)
            .and_then(|v| v.checked_mul(n_features))
            .ok_or_else(|| Error::shape("shape overflows"))?;
        if expected != data.len() {
            return Err(Error::shape(format!(
                "shape ({n_samples}, {length}, {n_features}) needs {expected} values, got {}",
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { data, n_samples, length, n_features })
    }

    /// Builds a univariate or multivariate batch from per-sample `(L, F)` blocks.
    pub fn from_samples(samples: &[Vec<f64>], length: usize, n_features: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(samples.len() * length * n_features);
        for (i, s) in samples.iter().enumerate() {
            if s.len() != length * n_features {
                return Err(Error::shape(format!("sample {i} has {} values, expected {}", s.len(), length * n_features)));
            }
            data.extend_from_slice(s);
        }
        Self::new(data, samples.len(), length, n_features)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn shape(&self) -> [usize; 3] {
        [self.n_samples, self.length, self.n_features]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// The `(L, F)` block of sample `i`, row-major over time.
    pub fn sample(&self, i: usize) -> &[f64] {
        let stride = self.length * self.n_features;
        &self.data[i * stride..(i + 1) * stride]
    }

    #[inline]
    pub fn get(&self, i: usize, t: usize, f: usize) -> f64 {
        self.data[(i * self.length + t) * self.n_features + f]
    }

    /// One feature channel of one sample as an owned vector.
    pub fn channel(&self, i: usize, f: usize) -> Vec<f64> {
        (0..self.length).map(|t| self.get(i, t, f)).collect()
    }

    pub fn same_series_shape(&self, other: &Self) -> bool {
        self.length == other.length && self.n_features == other.n_features
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbeddingRole {
    TimeSeries,
    Text,
}

/// `(n_samples, dim)` vectors produced by an external encoder.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Vec<f64>,
    n_samples: usize,
    dim: usize,
    role: EmbeddingRole,
}

impl EmbeddingMatrix {
    pub fn new(data: Vec<f64>, n_samples: usize, dim: usize, role: EmbeddingRole) -> Result<Self> {
        if dim == 0 {
            return Err(Error::shape("embedding dim must be positive"));
        }
        if n_samples.checked_mul(dim) != Some(data.len()) {
            return Err(Error::shape(format!(
                "shape ({n_samples}, {dim}) needs {} values, got {}",
                n_samples * dim,
                data.len()
            )));
        }
        check_finite(&data)?;
        Ok(Self { data, n_samples, dim, role })
    }

    pub fn from_rows(rows: &[Vec<f64>], role: EmbeddingRole) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(Error::shape(format!("row {i} has dim {}, expected {dim}", r.len())));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, rows.len(), dim, role)
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn role(&self) -> EmbeddingRole {
        self.role
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Keeps only the given rows, in the given order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self { data, n_samples: indices.len(), dim: self.dim, role: self.role }
    }
}

fn check_finite(data: &[f64]) -> Result<()> {
    match data.iter().position(|v| !v.is_finite()) {
        Some(pos) => Err(Error::format(format!("non-finite value at flat index {pos}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(default)]
    pub definition: String,
    pub values: Vec<String>,
}

impl Attribute {
    pub fn new(name: impl Into<String>, definition: impl Into<String>, values: &[&str]) -> Self {
        Self {
            name: name.into(),
            definition: definition.into(),
            values: values.iter().map(|v| v.to_string()).collect(),
        }
    }

    pub fn value_index(&self, value: &str) -> Option<usize> {
        self.values.iter().position(|v| v == value)
    }
}

/// Named discrete attributes with their value options.
///
/// `label_attributes` names the attributes whose joint value defines the class
/// label; when absent every attribute participates.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttributeSchema {
    pub attributes: Vec<Attribute>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_attributes: Option<Vec<String>>,
}

impl AttributeSchema {
    pub fn new(attributes: Vec<Attribute>) -> Self {
        Self { attributes, label_attributes: None }
    }

    pub fn is_empty(&self) -> bool {
        self.attributes.is_empty()
    }

    pub fn attribute(&self, name: &str) -> Option<&Attribute> {
        self.attributes.iter().find(|a| a.name == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// Unique attribute names, unique values per attribute, and at least two values each.
    pub fn check_structure(&self) -> Result<()> {
        let mut names = HashSet::new();
        for attr in &self.attributes {
            if attr.name.trim().is_empty() {
                return Err(Error::invalid("attribute with empty name"));
            }
            if !names.insert(attr.name.as_str()) {
                return Err(Error::invalid(format!("duplicate attribute '{}'", attr.name)));
            }
            let mut seen = HashSet::new();
            for v in &attr.values {
                if !seen.insert(v.as_str()) {
                    return Err(Error::invalid(format!("duplicate value '{v}' in attribute '{}'", attr.name)));
                }
            }
            if attr.values.len() < 2 {
                return Err(Error::invalid(format!("attribute '{}' has fewer than 2 values", attr.name)));
            }
        }
        if let Some(labels) = &self.label_attributes {
            for name in labels {
                if !names.contains(name.as_str()) {
                    return Err(Error::invalid(format!("label attribute '{name}' not in schema")));
                }
            }
        }
        Ok(())
    }

    /// Names of the attributes that define class labels, in schema order.
    pub fn label_attribute_names(&self) -> Vec<&str> {
        match &self.label_attributes {
            Some(names) => self
                .attributes
                .iter()
                .filter(|a| names.iter().any(|n| n == &a.name))
                .map(|a| a.name.as_str())
                .collect(),
            None => self.attributes.iter().map(|a| a.name.as_str()).collect(),
        }
    }
}

/// The aligned text, attribute and label condition of one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionRecord {
    pub sample_id: String,
    pub text: String,
    pub attrs: BTreeMap<String, usize>,
    pub label: u64,
}

impl ConditionRecord {
    /// Value indices in schema order; `None` where the record omits an attribute.
    pub fn attr_vector(&self, schema: &AttributeSchema) -> Vec<Option<usize>> {
        schema.attributes.iter().map(|a| self.attrs.get(&a.name).copied()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    HigherBetter,
    LowerBetter,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub metric: String,
    pub value: f64,
    pub direction: Direction,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct ReportContext {
    pub dataset_id: String,
    pub model_id: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricReport {
    pub entries: Vec<MetricEntry>,
    pub context: ReportContext,
}

impl MetricReport {
    pub fn new(context: ReportContext) -> Self {
        Self { entries: Vec::new(), context }
    }

    /// Adds an entry, rejecting duplicate names and non-finite values.
    pub fn push(&mut self, metric: impl Into<String>, value: f64, direction: Direction) -> Result<()> {
        let metric = metric.into();
        if !value.is_finite() {
            return Err(Error::invalid(format!("metric '{metric}' is not finite")));
        }
        if self.get(&metric).is_some() {
            return Err(Error::invalid(format!("duplicate metric '{metric}'")));
        }
        self.entries.push(MetricEntry { metric, value, direction });
        Ok(())
    }

    pub fn get(&self, metric: &str) -> Option<&MetricEntry> {
        self.entries.iter().find(|e| e.metric == metric)
    }

    pub fn check(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for e in &self.entries {
            if !seen.insert(e.metric.as_str()) {
                return Err(Error::invalid(format!("duplicate metric '{}'", e.metric)));
            }
            if !e.value.is_finite() {
                return Err(Error::invalid(format!("metric '{}' is not finite", e.metric)));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    CountMismatch,
    UnknownAttribute,
    ValueIndexOutOfRange,
    NonFiniteValue,
    LabelInconsistency,
    InvalidSchema,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    pub(crate) fn add(&mut self, kind: ViolationKind, message: impl Into<String>) {
        self.violations.push(Violation { kind, message: message.into() });
    }
}

/// Checks a series batch against its conditions and schema.
///
/// Labels are consistent when they are in bijection with the joint values of
/// the schema's label attributes.
pub fn validate_dataset(
    series: &TimeSeriesTensor,
    conditions: &[ConditionRecord],
    schema: &AttributeSchema,
) -> ValidationReport {
    let mut report = ValidationReport::default();
    if let Err(e) = schema.check_structure() {
        report.add(ViolationKind::InvalidSchema, e.to_string());
    }
    if conditions.len() != series.n_samples() {
        report.add(
            ViolationKind::CountMismatch,
            format!("count mismatch: {} series but {} condition records", series.n_samples(), conditions.len()),
        );
    }
    if let Some(pos) = series.data().iter().position(|v| !v.is_finite()) {
        report.add(ViolationKind::NonFiniteValue, format!("non-finite value at flat index {pos}"));
    }

    for (i, rec) in conditions.iter().enumerate() {
        for (name, &idx) in &rec.attrs {
            match schema.attribute(name) {
                None => report.add(
                    ViolationKind::UnknownAttribute,
                    format!("record {i} ({}): unknown attribute '{name}'", rec.sample_id),
                ),
                Some(attr) if idx >= attr.values.len() => report.add(
                    ViolationKind::ValueIndexOutOfRange,
                    format!(
                        "record {i} ({}): value index out of range: {name}={idx} but only {} values",
                        rec.sample_id,
                        attr.values.len()
                    ),
                ),
                Some(_) => {}
            }
        }
    }

    let label_names = schema.label_attribute_names();
    let mut combo_to_label: HashMap<Vec<Option<usize>>, u64> = HashMap::new();
    let mut label_to_combo: HashMap<u64, Vec<Option<usize>>> = HashMap::new();
    for (i, rec) in conditions.iter().enumerate() {
        let combo: Vec<Option<usize>> = label_names.iter().map(|n| rec.attrs.get(*n).copied()).collect();
        if let Some(&prev) = combo_to_label.get(&combo) {
            if prev != rec.label {
                report.add(
                    ViolationKind::LabelInconsistency,
                    format!("record {i} ({}): label {} but the same combination has label {prev}", rec.sample_id, rec.label),
                );
            }
            continue;
        }
        if label_to_combo.contains_key(&rec.label) {
            report.add(
                ViolationKind::LabelInconsistency,
                format!("record {i} ({}): label {} is shared by different combinations", rec.sample_id, rec.label),
            );
            continue;
        }
        combo_to_label.insert(combo.clone(), rec.label);
        label_to_combo.insert(rec.label, combo);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> AttributeSchema {
        AttributeSchema::new(vec![
            Attribute::new("trend", "", &["up", "down"]),
            Attribute::new("season", "", &["none", "one", "two"]),
        ])
    }

    fn record(i: usize, trend: usize, season: usize, label: u64) -> ConditionRecord {
        ConditionRecord {
            sample_id: format!("s{i}"),
            text: String::new(),
            attrs: BTreeMap::from([("trend".into(), trend), ("season".into(), season)]),
            label,
        }
    }

    fn series(n: usize) -> TimeSeriesTensor {
        TimeSeriesTensor::new(vec![0.5; n * 4], n, 4, 1).unwrap()
    }

    #[test]
    fn well_formed_passes() {
        let recs = vec![record(0, 0, 0, 0), record(1, 1, 2, 1), record(2, 0, 0, 0)];
        assert!(validate_dataset(&series(3), &recs, &schema()).passed());
    }

    #[test]
    fn short_conditions_is_count_mismatch() {
        let recs = vec![record(0, 0, 0, 0)];
        let rep = validate_dataset(&series(2), &recs, &schema());
        assert!(rep.has(ViolationKind::CountMismatch));
        assert!(rep.violations[0].message.contains("count mismatch"));
    }

    #[test]
    fn index_equal_to_value_count_is_out_of_range() {
        let recs = vec![record(0, 2, 0, 0)];
        let rep = validate_dataset(&series(1), &recs, &schema());
        assert!(rep.has(ViolationKind::ValueIndexOutOfRange));
        assert!(rep.violations.iter().any(|v| v.message.contains("value index out of range")));
    }

    #[test]
    fn label_inconsistency_detected_both_ways() {
        let recs = vec![record(0, 0, 0, 0), record(1, 0, 0, 1)];
        assert!(validate_dataset(&series(2), &recs, &schema()).has(ViolationKind::LabelInconsistency));
        let recs = vec![record(0, 0, 0, 0), record(1, 1, 0, 0)];
        assert!(validate_dataset(&series(2), &recs, &schema()).has(ViolationKind::LabelInconsistency));
    }

    #[test]
    fn label_attributes_restrict_the_combination() {
        let mut s = schema();
        s.label_attributes = Some(vec!["trend".into()]);
        let recs = vec![record(0, 0, 0, 0), record(1, 0, 2, 0), record(2, 1, 1, 1)];
        assert!(validate_dataset(&series(3), &recs, &s).passed());
    }

    #[test]
    fn tensor_rejects_bad_shapes_and_nan() {
        assert!(TimeSeriesTensor::new(vec![0.0; 5], 1, 3, 2).is_err());
        assert!(TimeSeriesTensor::new(vec![0.0, f64::NAN], 1, 2, 1).is_err());
        assert!(EmbeddingMatrix::new(vec![f64::INFINITY], 1, 1, EmbeddingRole::Text).is_err());
    }

    #[test]
    fn report_rejects_duplicates_and_nan() {
        let mut r = MetricReport::default();
        r.push("fid", 1.0, Direction::LowerBetter).unwrap();
        assert!(r.push("fid", 2.0, Direction::LowerBetter).is_err());
        assert!(r.push("acd", f64::NAN, Direction::LowerBetter).is_err());
    }
}
