use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Direction, MetricReport};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricGroup {
    Fidelity,
    Adherence,
}

impl MetricGroup {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fidelity => "fidelity",
            Self::Adherence => "adherence",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelRank {
    pub model: String,
    pub group: MetricGroup,
    pub mean_rank: f64,
    /// Population standard deviation of the per-dataset group ranks.
    pub std_rank: f64,
    pub per_dataset: BTreeMap<String, f64>,
}

/// Per-column ranks plus the per-model group summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub models: Vec<String>,
    /// `dataset -> metric -> model -> rank`.
    pub ranks: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>>,
    pub summary: Vec<ModelRank>,
}

impl RankTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("model,group,mean_rank,std_rank\n");
        for r in &self.summary {
            out.push_str(&format!(
                "{},{},{},{}\n",
                r.model,
                r.group.name(),
                crate::io::format_float(r.mean_rank),
                crate::io::format_float(r.std_rank)
            ));
        }
        out
    }
}

/// Ranks with 1 for the largest value; tied values share the average of
/// the positions they span.
pub fn rank_descending(scores: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Averages seeds, orients every metric so that higher is better, ranks models
/// per `(dataset, metric)`, averages ranks within each metric group and then
/// summarises across datasets.
///
/// Metrics absent from `grouping` are ignored. A `(dataset, metric)` column
/// reported by no model is skipped; one reported by only some models is an error.
pub fn aggregate_ranks(reports: &[MetricReport], grouping: &BTreeMap<String, MetricGroup>) -> Result<RankTable> {
    if reports.is_empty() {
        return Err(Error::invalid("no reports"));
    }
    // (dataset, metric, model) -> (sum, count)
    let mut cells: BTreeMap<(String, String, String), (f64, usize)> = BTreeMap::new();
    let mut directions: BTreeMap<String, Direction> = BTreeMap::new();
    let mut models = BTreeSet::new();
    let mut datasets = BTreeSet::new();
    for report in reports {
        report.check()?;
        let ctx = &report.context;
        models.insert(ctx.model_id.clone());
        datasets.insert(ctx.dataset_id.clone());
        for e in &report.entries {
            if !grouping.contains_key(&e.metric) {
                continue;
            }
            match directions.get(&e.metric) {
                Some(d) if *d != e.direction => {
                    return Err(Error::invalid(format!("metric '{}' reported with conflicting directions", e.metric)));
                }
                _ => {
                    directions.insert(e.metric.clone(), e.direction);
                }
            }
            let cell = cells
                .entry((ctx.dataset_id.clone(), e.metric.clone(), ctx.model_id.clone()))
                .or_insert((0.0, 0));
            cell.0 += e.value;
            cell.1 += 1;
        }
    }
    let models: Vec<String> = models.into_iter().collect();

    let mut ranks: BTreeMap<String, BTreeMap<String, BTreeMap<String, f64>>> = BTreeMap::new();
    for dataset in &datasets {
        for (metric, direction) in &directions {
            let present: Vec<Option<f64>> = models
                .iter()
                .map(|m| {
                    cells
                        .get(&(dataset.clone(), metric.clone(), m.clone()))
                        .map(|(sum, n)| sum / *n as f64)
                })
                .collect();
            if present.iter().all(Option::is_none) {
                continue;
            }
            if let Some(pos) = present.iter().position(Option::is_none) {
                return Err(Error::invalid(format!(
                    "missing cell: model '{}' has no '{metric}' on dataset '{dataset}'",
                    models[pos]
                )));
            }
            let oriented: Vec<f64> = present
                .iter()
                .map(|v| {
                    let v = v.unwrap_or(0.0);
                    match direction {
                        Direction::HigherBetter => v,
                        Direction::LowerBetter => -v,
                    }
                })
                .collect();
            let column = rank_descending(&oriented);
            let entry = ranks.entry(dataset.clone()).or_default().entry(metric.clone()).or_default();
            for (m, r) in models.iter().zip(column) {
                entry.insert(m.clone(), r);
            }
        }
    }

    let mut summary = Vec::new();
    for group in [MetricGroup::Fidelity, MetricGroup::Adherence] {
        for model in &models {
            let mut per_dataset = BTreeMap::new();
            for (dataset, by_metric) in &ranks {
                let group_ranks: Vec<f64> = by_metric
                    .iter()
                    .filter(|(metric, _)| grouping.get(*metric) == Some(&group))
                    .map(|(_, by_model)| by_model[model])
                    .collect();
                if !group_ranks.is_empty() {
                    per_dataset.insert(dataset.clone(), group_ranks.iter().sum::<f64>() / group_ranks.len() as f64);
                }
            }
            if per_dataset.is_empty() {
                continue;
            }
            let n = per_dataset.len() as f64;
            let mean = per_dataset.values().sum::<f64>() / n;
            let var = per_dataset.values().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            summary.push(ModelRank { model: model.clone(), group, mean_rank: mean, std_rank: var.sqrt(), per_dataset });
        }
    }
    Ok(RankTable { models, ranks, summary })
}
