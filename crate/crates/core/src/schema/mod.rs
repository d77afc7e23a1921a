//! Attribute schema discovery, value assignment and class-label indexing.

mod proposer;

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

pub use proposer::{
    open_proposer, AssignRequest, AssignResponse, Constraints, HttpProposer, KeywordAttribute, KeywordRules,
    KeywordValue, MockProposer, PipeProposer, ProposeRequest, Proposer, ProposerRequest, ProposerResponse,
    RepairHint,
};

use crate::error::{Error, Result};
use crate::io::{canonical_json, sha256_hex};
use crate::model::{Attribute, AttributeSchema};
use crate::rng::KeyedRng;

pub const OTHER: &str = "other";

/// Canonical form without adding `other`.
pub fn canonicalize(schema: &AttributeSchema) -> Result<AttributeSchema> {
    canonicalize_with(schema, false)
}

/// Trims names, lowercases and deduplicates values, sorts attributes by name and
/// values lexicographically with `other` last. `require_other` adds `other` where missing.
pub fn canonicalize_with(schema: &AttributeSchema, require_other: bool) -> Result<AttributeSchema> {
    let mut attributes = Vec::with_capacity(schema.attributes.len());
    let mut names = HashSet::new();
    for attr in &schema.attributes {
        let name = attr.name.trim().to_string();
        if name.is_empty() {
            return Err(Error::invalid("attribute with empty name"));
        }
        if !names.insert(name.clone()) {
            return Err(Error::invalid(format!("duplicate attribute '{name}'")));
        }
        let mut values = BTreeSet::new();
        for v in &attr.values {
            let v = v.trim().to_lowercase();
            if v.is_empty() {
                return Err(Error::invalid(format!("empty value in attribute '{name}'")));
            }
            values.insert(v);
        }
        let has_other = values.remove(OTHER);
        let mut values: Vec<String> = values.into_iter().collect();
        if has_other || require_other {
            values.push(OTHER.to_string());
        }
        attributes.push(Attribute { name, definition: attr.definition.trim().to_string(), values });
    }
    attributes.sort_by(|a, b| a.name.cmp(&b.name));
    let label_attributes = schema.label_attributes.as_ref().map(|labels| {
        labels.iter().map(|l| l.trim().to_string()).collect::<BTreeSet<_>>().into_iter().collect()
    });
    let out = AttributeSchema { attributes, label_attributes };
    out.check_structure()?;
    Ok(out)
}

/// SHA-256 of the canonical JSON serialization.
pub fn schema_hash(schema: &AttributeSchema) -> String {
    let text = canonical_json(schema).expect("schema serializes");
    sha256_hex(text.as_bytes())
}

/// Checks the discovery constraints: at least one attribute, a value count within
/// bounds (counting `other`) and `other` present when required.
pub fn check_constraints(schema: &AttributeSchema, c: &Constraints) -> Result<()> {
    if schema.is_empty() {
        return Err(Error::invalid("schema has no attributes"));
    }
    for attr in &schema.attributes {
        let n = attr.values.len();
        if n < c.min_values || n > c.max_values {
            return Err(Error::invalid(format!(
                "attribute '{}' has {n} values, expected {}..={}",
                attr.name, c.min_values, c.max_values
            )));
        }
        if c.require_other && attr.value_index(OTHER).is_none() {
            return Err(Error::invalid(format!("attribute '{}' lacks '{OTHER}'", attr.name)));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscoveryParams {
    pub batch_size: usize,
    pub stability: usize,
    pub max_iter: usize,
    pub seed: u64,
    pub constraints: Constraints,
}

impl Default for DiscoveryParams {
    fn default() -> Self {
        Self { batch_size: 100, stability: 3, max_iter: 50, seed: 0, constraints: Constraints::default() }
    }
}

impl DiscoveryParams {
    pub fn check(&self) -> Result<()> {
        if self.batch_size == 0 || self.stability == 0 || self.max_iter == 0 {
            return Err(Error::invalid("batch size, stability and max iterations must be at least 1"));
        }
        if self.constraints.min_values > self.constraints.max_values {
            return Err(Error::invalid("min_values exceeds max_values"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundOutcome {
    Accepted,
    /// Accepted after one repair request.
    Repaired,
    /// Both the response and its repair were unusable; the schema was left unchanged.
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    pub batch: Vec<usize>,
    pub outcome: RoundOutcome,
    pub hash: Option<String>,
    pub k_stable: usize,
    pub errors: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discovery {
    pub schema: AttributeSchema,
    pub converged: bool,
    pub rounds: usize,
    pub trace: Vec<RoundRecord>,
}

/// Draws batches without replacement, reshuffling the whole corpus once exhausted.
struct BatchSampler {
    rng: KeyedRng,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl BatchSampler {
    fn new(n: usize, seed: u64) -> Self {
        let mut s = Self { rng: KeyedRng::new(seed), epoch: 0, order: (0..n).collect(), pos: 0 };
        s.shuffle();
        s
    }

    fn shuffle(&mut self) {
        let mut rng = self.rng.stream(self.epoch, "discover_sample");
        self.order.sort_unstable();
        self.order.shuffle(&mut rng);
        self.epoch += 1;
        self.pos = 0;
    }

    fn next_batch(&mut self, size: usize) -> Vec<usize> {
        let mut batch = Vec::with_capacity(size);
        while batch.len() < size {
            if self.pos == self.order.len() {
                self.shuffle();
            }
            let i = self.order[self.pos];
            self.pos += 1;
            if !batch.contains(&i) {
                batch.push(i);
            }
        }
        batch
    }
}

/// Sends a request, retrying once if the transport fails.
fn call_with_retry<P: Proposer + ?Sized>(proposer: &mut P, request: &ProposerRequest) -> Result<String> {
    proposer.call(request).or_else(|_| proposer.call(request))
}

fn parse_proposal(raw: &str, c: &Constraints) -> std::result::Result<AttributeSchema, String> {
    let resp: ProposerResponse = serde_json::from_str(raw.trim()).map_err(|e| format!("unparseable response: {e}"))?;
    if let Some(err) = resp.error {
        return Err(format!("proposer reported: {err}"));
    }
    let schema = resp.schema.ok_or("response has no schema")?;
    let schema = canonicalize_with(&schema, c.require_other).map_err(|e| e.to_string())?;
    check_constraints(&schema, c).map_err(|e| e.to_string())?;
    Ok(schema)
}

/// Iterative schema discovery over a caption corpus.
///
/// Each round samples a batch, asks the proposer to refine the previous schema
/// and canonicalizes the answer. A round whose hash equals the previous schema's
/// hash increments the stability counter; any other accepted round resets it.
/// The first round has no predecessor and never counts. An unusable answer gets
/// one repair request; if that also fails the round is skipped.
pub fn discover<P: Proposer + ?Sized>(corpus: &[String], proposer: &mut P, params: &DiscoveryParams) -> Result<Discovery> {
    params.check()?;
    if corpus.len() < params.batch_size {
        return Err(Error::invalid(format!(
            "corpus has {} captions, fewer than the batch size {}",
            corpus.len(),
            params.batch_size
        )));
    }
    let mut sampler = BatchSampler::new(corpus.len(), params.seed);
    let mut prev: Option<(AttributeSchema, String)> = None;
    let mut k_stable = 0;
    let mut round = 0;
    let mut trace = Vec::new();
    while k_stable < params.stability && round < params.max_iter {
        round += 1;
        let batch = sampler.next_batch(params.batch_size);
        let mut request = ProposeRequest {
            current_schema: prev.as_ref().map(|(s, _)| s.clone()).unwrap_or_default(),
            observations: batch.iter().map(|&i| corpus[i].clone()).collect(),
            constraints: params.constraints,
            repair: None,
        };
        let mut errors = Vec::new();
        let mut accepted = None;
        for attempt in 0..2 {
            let raw = call_with_retry(proposer, &ProposerRequest::Propose(request.clone()))?;
            match parse_proposal(&raw, &params.constraints) {
                Ok(schema) => {
                    accepted = Some((schema, attempt > 0));
                    break;
                }
                Err(error) => {
                    errors.push(error.clone());
                    request.repair = Some(RepairHint { previous_output: raw, error });
                }
            }
        }
        let (outcome, hash) = match accepted {
            Some((schema, repaired)) => {
                let hash = schema_hash(&schema);
                if prev.as_ref().is_some_and(|(_, h)| *h == hash) {
                    k_stable += 1;
                } else {
                    k_stable = 0;
                }
                prev = Some((schema, hash.clone()));
                (if repaired { RoundOutcome::Repaired } else { RoundOutcome::Accepted }, Some(hash))
            }
            None => (RoundOutcome::Skipped, None),
        };
        trace.push(RoundRecord { round, batch, outcome, hash, k_stable, errors });
    }
    let (schema, _) = prev.ok_or_else(|| Error::Proposer(format!("no usable schema after {round} rounds")))?;
    Ok(Discovery { schema, converged: k_stable >= params.stability, rounds: round, trace })
}

fn resolve_value(attr: &Attribute, value: Option<&serde_json::Value>, other: usize) -> usize {
    match value {
        Some(serde_json::Value::String(s)) => attr.value_index(&s.trim().to_lowercase()).unwrap_or(other),
        Some(serde_json::Value::Number(n)) => match n.as_u64() {
            Some(i) if (i as usize) < attr.values.len() => i as usize,
            _ => other,
        },
        _ => other,
    }
}

fn parse_assignments(raw: &str, schema: &AttributeSchema, n: usize, others: &[usize]) -> std::result::Result<Vec<Vec<usize>>, String> {
    let resp: AssignResponse = serde_json::from_str(raw.trim()).map_err(|e| format!("unparseable response: {e}"))?;
    if let Some(err) = resp.error {
        return Err(format!("proposer reported: {err}"));
    }
    let rows = resp.assignments.ok_or("response has no assignments")?;
    if rows.len() != n {
        return Err(format!("expected {n} assignments, got {}", rows.len()));
    }
    Ok(rows
        .iter()
        .map(|row| {
            schema
                .attributes
                .iter()
                .zip(others)
                .map(|(attr, &other)| resolve_value(attr, row.get(&attr.name), other))
                .collect()
        })
        .collect())
}

/// Value indices for each caption, in input order, `batch_size` captions per request.
///
/// Missing, unknown or out-of-range values map to `other`, which every attribute must have.
pub fn assign_batch<P: Proposer + ?Sized>(
    captions: &[String],
    schema: &AttributeSchema,
    proposer: &mut P,
    batch_size: usize,
) -> Result<Vec<Vec<usize>>> {
    if batch_size == 0 {
        return Err(Error::invalid("batch size must be at least 1"));
    }
    let others = schema
        .attributes
        .iter()
        .map(|a| a.value_index(OTHER).ok_or_else(|| Error::invalid(format!("attribute '{}' lacks '{OTHER}'", a.name))))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(captions.len());
    for chunk in captions.chunks(batch_size) {
        let mut request = AssignRequest { schema: schema.clone(), captions: chunk.to_vec(), repair: None };
        let mut last_error = String::new();
        let mut done = false;
        for _ in 0..2 {
            let raw = call_with_retry(proposer, &ProposerRequest::Assign(request.clone()))?;
            match parse_assignments(&raw, schema, chunk.len(), &others) {
                Ok(rows) => {
                    out.extend(rows);
                    done = true;
                    break;
                }
                Err(error) => {
                    last_error = error.clone();
                    request.repair = Some(RepairHint { previous_output: raw, error });
                }
            }
        }
        if !done {
            return Err(Error::Proposer(format!("assignment failed after repair: {last_error}")));
        }
    }
    Ok(out)
}

pub fn assign_attributes<P: Proposer + ?Sized>(caption: &str, schema: &AttributeSchema, proposer: &mut P) -> Result<Vec<usize>> {
    let mut rows = assign_batch(&[caption.to_string()], schema, proposer, 1)?;
    Ok(rows.remove(0))
}

/// Distinct attribute combinations in lexicographic order; position is the label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComboTable {
    pub combos: Vec<Vec<usize>>,
}

impl ComboTable {
    pub fn len(&self) -> usize {
        self.combos.len()
    }

    pub fn is_empty(&self) -> bool {
        self.combos.is_empty()
    }

    pub fn label(&self, combo: &[usize]) -> Option<u64> {
        self.combos.binary_search_by(|c| c.as_slice().cmp(combo)).ok().map(|i| i as u64)
    }

    /// Labels for held-out vectors; a combination absent from the table is an error.
    pub fn apply(&self, vectors: &[Vec<usize>]) -> Result<Vec<u64>> {
        vectors
            .iter()
            .enumerate()
            .map(|(i, v)| {
                self.label(v).ok_or_else(|| Error::contract(format!("vector {i} has unseen combination {v:?}")))
            })
            .collect()
    }
}

pub fn index_labels(vectors: &[Vec<usize>]) -> Result<(Vec<u64>, ComboTable)> {
    if let Some(first) = vectors.first() {
        if let Some((i, v)) = vectors.iter().enumerate().find(|(_, v)| v.len() != first.len()) {
            return Err(Error::shape(format!("vector {i} has {} attributes, expected {}", v.len(), first.len())));
        }
    }
    let combos: BTreeSet<&Vec<usize>> = vectors.iter().collect();
    let table = ComboTable { combos: combos.into_iter().cloned().collect() };
    let labels = table.apply(vectors)?;
    Ok((labels, table))
}
