//! Layout-quality metrics and the modularity clustering baseline.

pub mod effect;
pub mod modularity;

pub use effect::{effect_metrics, layout_persistence, AnalysisError, EffectReport, MetricsExport};
pub use modularity::{
    cluster_rest_lengths, greedy_modularity, modularity, ClusterError, ClusterHierarchy, Merge,
};
