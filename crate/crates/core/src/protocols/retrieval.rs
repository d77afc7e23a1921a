use std::collections::HashMap;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::cosine;
use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;
use crate::rng::KeyedRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Candidates per pool, including the true description.
    pub pool_size: usize,
    pub repeats: usize,
    pub seed: u64,
}

impl RetrievalConfig {
    fn check(&self) -> Result<()> {
        if self.pool_size == 0 || self.repeats == 0 {
            return Err(Error::invalid("pool size and repeats must be at least 1"));
        }
        Ok(())
    }
}

fn sim(a: &[f64], b: &[f64], what: &str) -> Result<f64> {
    cosine(a, b).ok_or_else(|| Error::invalid(format!("zero-norm embedding in {what}")))
}

/// Top-1 retrieval accuracy of each generated embedding against its own text
/// embedding among `pool_size − 1` distractors, over every query.
///
/// See [`retrieval_acc1_subset`].
pub fn retrieval_acc1(
    gen: &EmbeddingMatrix,
    text: &EmbeddingMatrix,
    captions: Option<&[String]>,
    cfg: &RetrievalConfig,
) -> Result<f64> {
    let all: Vec<usize> = (0..gen.n_samples()).collect();
    retrieval_acc1_subset(gen, text, captions, cfg, &all)
}

/// Top-1 retrieval accuracy restricted to the `queries` rows.
///
/// Distractors are drawn without replacement from all other rows. With
/// `captions`, rows sharing a caption string count once and never serve as a
/// distractor for a query with that caption. A query is a hit only if its true
/// text scores strictly above every distractor. Pools for `(repeat, query)` are
/// keyed by the seed.
pub fn retrieval_acc1_subset(
    gen: &EmbeddingMatrix,
    text: &EmbeddingMatrix,
    captions: Option<&[String]>,
    cfg: &RetrievalConfig,
    queries: &[usize],
) -> Result<f64> {
    cfg.check()?;
    let n = gen.n_samples();
    if text.n_samples() != n || text.dim() != gen.dim() {
        return Err(Error::shape(format!(
            "generated ({n}, {}) vs text ({}, {})",
            gen.dim(),
            text.n_samples(),
            text.dim()
        )));
    }
    if queries.is_empty() {
        return Err(Error::invalid("no queries"));
    }
    if let Some(&q) = queries.iter().find(|&&q| q >= n) {
        return Err(Error::invalid(format!("query index {q} out of range")));
    }

    // One representative row per distinct caption, and each row's position
    // among the representatives.
    let (reps, rep_of): (Vec<usize>, Vec<usize>) = match captions {
        Some(c) => {
            if c.len() != n {
                return Err(Error::shape(format!("{} captions for {n} rows", c.len())));
            }
            let mut first: HashMap<&str, usize> = HashMap::new();
            let mut reps = Vec::new();
            let rep_of = c
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    *first.entry(s.as_str()).or_insert_with(|| {
                        reps.push(i);
                        reps.len() - 1
                    })
                })
                .collect();
            (reps, rep_of)
        }
        None => ((0..n).collect(), (0..n).collect()),
    };
    let available = reps.len() - 1;
    let n_distractors = cfg.pool_size - 1;
    if n_distractors > available {
        return Err(Error::invalid(format!(
            "pool of {} needs {n_distractors} distractors but only {available} are available",
            cfg.pool_size
        )));
    }

    let keyed = KeyedRng::new(cfg.seed);
    let mut total = 0.0;
    for repeat in 0..cfg.repeats {
        let hits: Vec<bool> = queries
            .par_iter()
            .map(|&q| -> Result<bool> {
                let target = sim(gen.row(q), text.row(q), "retrieval")?;
                let own = rep_of[q];
                let mut rng = keyed.stream2(repeat as u64, q as u64, "retrieval");
                for pick in index::sample(&mut rng, available, n_distractors) {
                    let r = reps[if pick >= own { pick + 1 } else { pick }];
                    if sim(gen.row(q), text.row(r), "retrieval")? >= target {
                        return Ok(false);
                    }
                }
                Ok(true)
            })
            .collect::<Result<_>>()?;
        total += hits.iter().filter(|&&h| h).count() as f64 / queries.len() as f64;
    }
    Ok(total / cfg.repeats as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalOrderResult {
    /// Row `i`: distribution of the positions retrieved by segment `i`.
    pub confusion: Vec<Vec<f64>>,
    pub accuracy: f64,
}

/// Each segment embedding retrieves the most similar positional text within
/// its own series; rows of the confusion matrix are normalised to sum to 1.
/// Ties go to the lowest position.
pub fn temporal_order_eval(segments: &[EmbeddingMatrix], texts: &[EmbeddingMatrix]) -> Result<TemporalOrderResult> {
    if segments.is_empty() {
        return Err(Error::invalid("no series"));
    }
    if segments.len() != texts.len() {
        return Err(Error::shape(format!("{} segment sets vs {} text sets", segments.len(), texts.len())));
    }
    let p = segments[0].n_samples();
    if p == 0 {
        return Err(Error::invalid("no segments"));
    }
    let mut counts = vec![vec![0usize; p]; p];
    for (s, (seg, txt)) in segments.iter().zip(texts).enumerate() {
        if seg.n_samples() != p || txt.n_samples() != p {
            return Err(Error::shape(format!("series {s} has ragged segment count")));
        }
        if seg.dim() != txt.dim() {
            return Err(Error::shape(format!("series {s}: segment dim {} vs text dim {}", seg.dim(), txt.dim())));
        }
        for (i, row) in counts.iter_mut().enumerate() {
            let mut best = 0;
            let mut best_sim = f64::NEG_INFINITY;
            for j in 0..p {
                let v = sim(seg.row(i), txt.row(j), "temporal order")?;
                if v > best_sim {
                    best_sim = v;
                    best = j;
                }
            }
            row[best] += 1;
        }
    }
    let n = segments.len() as f64;
    let confusion: Vec<Vec<f64>> = counts.iter().map(|row| row.iter().map(|&c| c as f64 / n).collect()).collect();
    let accuracy = (0..p).map(|i| confusion[i][i]).sum::<f64>() / p as f64;
    Ok(TemporalOrderResult { confusion, accuracy })
}

/// Fraction of samples whose segment labels are all predicted correctly.
pub fn joint_segment_accuracy(pred: &[Vec<usize>], truth: &[Vec<usize>]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::shape(format!("{} predictions vs {} ground-truth rows", pred.len(), truth.len())));
    }
    if pred.is_empty() {
        return Err(Error::invalid("no samples"));
    }
    let mut correct = 0usize;
    for (i, (p, t)) in pred.iter().zip(truth).enumerate() {
        if p.len() != t.len() {
            return Err(Error::shape(format!("sample {i}: {} predicted vs {} true segments", p.len(), t.len())));
        }
        if p == t {
            correct += 1;
        }
    }
    Ok(correct as f64 / pred.len() as f64)
}
