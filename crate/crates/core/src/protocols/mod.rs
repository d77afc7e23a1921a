//! Evaluation protocols built on top of the metrics.

mod compgen;
mod rank;
mod retrieval;
mod utility;

pub use compgen::{
    compositional_analysis, dknn, hamming, head_tail_split, normalized_accuracy, CompgenResult, SubgroupAccuracy,
    DEFAULT_HEAD_TAIL_FRACTION,
};
pub use rank::{aggregate_ranks, rank_descending, MetricGroup, ModelRank, RankTable};
pub use retrieval::{
    joint_segment_accuracy, retrieval_acc1, retrieval_acc1_subset, temporal_order_eval, RetrievalConfig,
    TemporalOrderResult,
};
pub use utility::drop_rate;
