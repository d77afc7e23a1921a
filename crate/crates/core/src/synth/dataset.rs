use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{
    apply_mv_transform, compose_univariate, render_caption, sample_segment_labels, ComposeOptions,
    MvKind, MvTransform, PrimaryAttrs, SampleTrace, SecondaryAttrs, Shapelet, SynthVariant,
    TrendDirection, TrendType, HF_CYCLES, MAX_SHIFT, MIN_SHIFT, SEASON_CYCLES,
};
use crate::error::{Error, Result};
use crate::io;
use crate::model::{Attribute, AttributeSchema, ConditionRecord, TimeSeriesTensor};
use crate::rng::KeyedRng;

pub const DEFAULT_LENGTH: usize = 96;

/// Sample indices per split, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SplitAssignment {
    pub train: Vec<usize>,
    pub valid: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct SynthDataset {
    pub variant: SynthVariant,
    pub series: TimeSeriesTensor,
    pub conditions: Vec<ConditionRecord>,
    pub schema: AttributeSchema,
    pub splits: SplitAssignment,
    pub traces: Vec<SampleTrace>,
}

impl SynthDataset {
    /// Writes `series.tsb`, `conditions.jsonl`, `schema.json` and `splits.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir)?;
        io::write_series(&self.series, dir.join("series.tsb"))?;
        io::write_conditions(&self.conditions, dir.join("conditions.jsonl"))?;
        io::write_schema(&self.schema, dir.join("schema.json"))?;
        io::write_canonical(&self.splits, dir.join("splits.json"))?;
        Ok(())
    }
}

const SEGMENT_ATTRS: [&str; 3] = ["segment_1_shapelet", "segment_2_shapelet", "segment_3_shapelet"];

pub fn synth_schema(variant: SynthVariant) -> AttributeSchema {
    let shapelets: Vec<&str> = Shapelet::ALL.iter().map(|s| s.name()).collect();
    let season: Vec<String> = SEASON_CYCLES.iter().map(u32::to_string).collect();
    let hf: Vec<String> = HF_CYCLES.iter().map(u32::to_string).collect();

    let mut attrs = vec![
        Attribute::new(
            "trend_type",
            "shape of the global trend",
            &TrendType::ALL.iter().map(|t| t.name()).collect::<Vec<_>>(),
        ),
        Attribute::new(
            "trend_direction",
            "whether the trend rises or falls",
            &TrendDirection::ALL.iter().map(|d| d.name()).collect::<Vec<_>>(),
        ),
        Attribute::new("season_cycles", "number of seasonal cycles over the window", &season.iter().map(String::as_str).collect::<Vec<_>>()),
    ];
    for (i, name) in SEGMENT_ATTRS.iter().enumerate() {
        attrs.push(Attribute::new(*name, format!("local pattern in segment {}", i + 1), &shapelets));
    }
    attrs.push(Attribute::new("hf_cycles", "cycles of the high-frequency component", &hf.iter().map(String::as_str).collect::<Vec<_>>()));
    if variant == SynthVariant::M {
        attrs.push(Attribute::new(
            "mv_transform",
            "rule deriving the second variable from the first",
            &MvKind::ALL.iter().map(|k| k.name()).collect::<Vec<_>>(),
        ));
    }
    AttributeSchema {
        attributes: attrs,
        label_attributes: Some(vec!["trend_type".into(), "trend_direction".into(), "season_cycles".into()]),
    }
}

fn primary_index(p: &PrimaryAttrs) -> [usize; 3] {
    [
        TrendType::ALL.iter().position(|&t| t == p.trend_type).unwrap_or(0),
        TrendDirection::ALL.iter().position(|&d| d == p.trend_direction).unwrap_or(0),
        SEASON_CYCLES.iter().position(|&c| c == p.season_cycles).unwrap_or(0),
    ]
}

struct GeneratedSample {
    values: Vec<f64>,
    record: ConditionRecord,
    trace: SampleTrace,
}

fn generate_sample(
    variant: SynthVariant,
    keyed: &KeyedRng,
    index: usize,
    combo: usize,
    primary: &PrimaryAttrs,
    length: usize,
) -> Result<GeneratedSample> {
    let idx = index as u64;
    let hf_cycles = HF_CYCLES[keyed.stream(idx, "hf_cycles").random_range(0..HF_CYCLES.len())];
    let labels = sample_segment_labels(&mut keyed.stream(idx, "shapelet_labels"));
    let secondary = SecondaryAttrs::new(hf_cycles, labels)?;
    let comp = compose_univariate(primary, &secondary, keyed, idx, length, ComposeOptions::default())?;

    let [ti, di, si] = primary_index(primary);
    let mut attrs = BTreeMap::from([
        ("trend_type".to_string(), ti),
        ("trend_direction".to_string(), di),
        ("season_cycles".to_string(), si),
        ("hf_cycles".to_string(), HF_CYCLES.iter().position(|&c| c == hf_cycles).unwrap_or(0)),
    ]);
    for (name, s) in SEGMENT_ATTRS.iter().zip(&comp.labels) {
        attrs.insert(name.to_string(), s.index());
    }

    let mut trace = comp.trace;
    let (values, text) = match variant {
        SynthVariant::U => (comp.series, comp.caption),
        SynthVariant::M => {
            let mut trng = keyed.stream(idx, "mv_transform");
            let kind_idx = trng.random_range(0..MvKind::ALL.len());
            let kind = MvKind::ALL[kind_idx];
            let transform = if kind.is_shift() {
                MvTransform::shift(kind, trng.random_range(MIN_SHIFT..=MAX_SHIFT))?
            } else {
                MvTransform::flip(kind)?
            };
            let second = apply_mv_transform(&comp.series, &transform)?;
            attrs.insert("mv_transform".to_string(), kind_idx);
            trace.transform = Some(transform);
            let values = comp.series.iter().zip(&second).flat_map(|(&a, &b)| [a, b]).collect();
            (values, render_caption(primary, &secondary, Some(&transform)))
        }
    };
    let tag = match variant {
        SynthVariant::U => "synth-u",
        SynthVariant::M => "synth-m",
    };
    let record = ConditionRecord {
        sample_id: format!("{tag}-{index:06}"),
        text,
        attrs,
        label: combo as u64,
    };
    Ok(GeneratedSample { values, record, trace })
}

/// Generates `32 × n_per_combo` samples, ordered by primary combination.
///
/// Labels number the primary combinations in lexicographic order. Splits are
/// 6:1:1 within each combination.
pub fn build_synth_dataset(variant: SynthVariant, seed: u64, n_per_combo: usize, length: usize) -> Result<SynthDataset> {
    if n_per_combo < 8 {
        return Err(Error::invalid(format!("n_per_combo must be at least 8, got {n_per_combo}")));
    }
    if !length.is_multiple_of(3) || length / 3 < 18 {
        return Err(Error::invalid(format!("length must be divisible by 3 with segments of at least 18, got {length}")));
    }
    let keyed = KeyedRng::new(seed);
    let combos = PrimaryAttrs::all();
    let total = combos.len() * n_per_combo;

    let samples: Vec<GeneratedSample> = (0..total)
        .into_par_iter()
        .map(|index| {
            let combo = index / n_per_combo;
            generate_sample(variant, &keyed, index, combo, &combos[combo], length)
        })
        .collect::<Result<_>>()?;

    let n_train = n_per_combo * 6 / 8;
    let n_valid = n_per_combo / 8;
    let mut splits = SplitAssignment::default();
    for combo in 0..combos.len() {
        let mut order: Vec<usize> = (0..n_per_combo).map(|j| combo * n_per_combo + j).collect();
        order.shuffle(&mut keyed.stream(combo as u64, "split"));
        splits.train.extend_from_slice(&order[..n_train]);
        splits.valid.extend_from_slice(&order[n_train..n_train + n_valid]);
        splits.test.extend_from_slice(&order[n_train + n_valid..]);
    }
    splits.train.sort_unstable();
    splits.valid.sort_unstable();
    splits.test.sort_unstable();

    let n_features = variant.n_features();
    let mut data = Vec::with_capacity(total * length * n_features);
    let mut conditions = Vec::with_capacity(total);
    let mut traces = Vec::with_capacity(total);
    for s in samples {
        data.extend_from_slice(&s.values);
        conditions.push(s.record);
        traces.push(s.trace);
    }
    Ok(SynthDataset {
        variant,
        series: TimeSeriesTensor::new(data, total, length, n_features)?,
        conditions,
        schema: synth_schema(variant),
        splits,
        traces,
    })
}
