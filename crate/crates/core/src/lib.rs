//! Evaluation engine and synthetic benchmark generator for conditional
//! time-series generation.
//!
//! - [`synth`]: synthetic datasets with aligned text, attribute and label conditions
//! - [`stats`]: distributional fidelity metrics on raw series (MDD, ACD, SD, KD)
//! - [`embed`]: embedding-space metrics (FID, kNN precision/recall, CTTP score, J-FTSD)
//! - [`align`]: reference-anchored metrics (best-of-K DTW, CRPS)
//! - [`protocols`]: rank aggregation, retrieval, temporal order, compositional and utility protocols
//! - [`schema`]: attribute schema discovery, value assignment and label indexing
//! - [`io`]: TSB1 tensor container, conditions, schemas and canonical JSON reports

pub mod align;
pub mod embed;
pub mod error;
pub mod io;
pub mod model;
pub mod protocols;
pub mod rng;
pub mod schema;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
pub use model::{
    validate_dataset, Attribute, AttributeSchema, ConditionRecord, Direction, EmbeddingMatrix, EmbeddingRole,
    MetricEntry, MetricReport, ReportContext, TimeSeriesTensor, ValidationReport, Violation, ViolationKind,
};
