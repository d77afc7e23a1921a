use serde::{Deserialize, Serialize};

use super::retrieval::{retrieval_acc1_subset, RetrievalConfig};
use crate::error::{Error, Result};
use crate::model::EmbeddingMatrix;

pub const DEFAULT_HEAD_TAIL_FRACTION: f64 = 0.20;

/// Number of positions where two attribute vectors differ.
pub fn hamming(a: &[usize], b: &[usize]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::shape(format!("attribute vectors of length {} and {}", a.len(), b.len())));
    }
    Ok(a.iter().zip(b).filter(|(x, y)| x != y).count())
}

/// Mean Hamming distance from `test` to its `k` nearest training vectors.
/// Ties at the cut-off keep the earlier training vectors.
pub fn dknn(test: &[usize], train: &[Vec<usize>], k: usize) -> Result<f64> {
    if k == 0 || k > train.len() {
        return Err(Error::invalid(format!("k must be in [1, {}], got {k}", train.len())));
    }
    let mut dists = train.iter().map(|t| hamming(test, t)).collect::<Result<Vec<_>>>()?;
    // Stable sort keeps training order among equal distances.
    dists.sort();
    Ok(dists[..k].iter().sum::<usize>() as f64 / k as f64)
}

/// Indices of the lowest and highest `⌊fraction·n⌋` values, ties broken by
/// index (lower index counts as closer). Both lists are returned ascending.
pub fn head_tail_split(values: &[f64], fraction: f64) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = values.len();
    if n < 5 {
        return Err(Error::invalid(format!("head/tail split needs at least 5 samples, got {n}")));
    }
    if !(fraction > 0.0 && fraction <= 0.5) {
        return Err(Error::invalid(format!("fraction must be in (0, 0.5], got {fraction}")));
    }
    let m = (fraction * n as f64).floor() as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let mut head = order[..m].to_vec();
    let mut tail = order[n - m..].to_vec();
    head.sort_unstable();
    tail.sort_unstable();
    Ok((head, tail))
}

/// `acc_gen / acc_ref`, missing when the reference accuracy is zero.
pub fn normalized_accuracy(acc_gen: f64, acc_ref: f64) -> Option<f64> {
    (acc_ref > 0.0).then(|| acc_gen / acc_ref)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubgroupAccuracy {
    pub indices: Vec<usize>,
    pub acc_gen: f64,
    pub acc_ref: f64,
    pub acc_norm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompgenResult {
    pub k: usize,
    pub dknn: Vec<f64>,
    pub head: SubgroupAccuracy,
    pub tail: SubgroupAccuracy,
    /// `tail.acc_norm − head.acc_norm` when both exist.
    pub gap: Option<f64>,
}

/// Splits the test set by compositional distance from training and compares
/// normalised retrieval accuracy of the closest and farthest subgroups.
///
/// Acc@1 is computed within each subgroup; distractors come from the whole test set.
#[allow(clippy::too_many_arguments)]
pub fn compositional_analysis(
    train_attrs: &[Vec<usize>],
    test_attrs: &[Vec<usize>],
    k: usize,
    gen_emb: &EmbeddingMatrix,
    ref_emb: &EmbeddingMatrix,
    text_emb: &EmbeddingMatrix,
    captions: Option<&[String]>,
    cfg: &RetrievalConfig,
    fraction: f64,
) -> Result<CompgenResult> {
    if test_attrs.len() != gen_emb.n_samples() || test_attrs.len() != ref_emb.n_samples() {
        return Err(Error::shape(format!(
            "{} test attribute vectors vs {} generated and {} reference embeddings",
            test_attrs.len(),
            gen_emb.n_samples(),
            ref_emb.n_samples()
        )));
    }
    let dknn_values = test_attrs.iter().map(|t| dknn(t, train_attrs, k)).collect::<Result<Vec<_>>>()?;
    let (head_idx, tail_idx) = head_tail_split(&dknn_values, fraction)?;
    let subgroup = |indices: Vec<usize>| -> Result<SubgroupAccuracy> {
        let acc_gen = retrieval_acc1_subset(gen_emb, text_emb, captions, cfg, &indices)?;
        let acc_ref = retrieval_acc1_subset(ref_emb, text_emb, captions, cfg, &indices)?;
        Ok(SubgroupAccuracy { indices, acc_gen, acc_ref, acc_norm: normalized_accuracy(acc_gen, acc_ref) })
    };
    let head = subgroup(head_idx)?;
    let tail = subgroup(tail_idx)?;
    let gap = match (head.acc_norm, tail.acc_norm) {
        (Some(h), Some(t)) => Some(t - h),
        _ => None,
    };
    Ok(CompgenResult { k, dknn: dknn_values, head, tail, gap })
}
