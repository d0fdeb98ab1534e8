//! Configuration, dataset manifests, synthetic suites, metrics, model files
//! and report writers.

pub mod config;
pub mod manifest;
pub mod metrics;
pub mod persist;
pub mod report;
pub mod synthetic;

pub use config::{defaults_toml, Config};
pub use manifest::{DatasetManifest, LoadOptions};
pub use metrics::{
    accuracy, best_threshold, best_threshold_many, binary_metrics, class_metrics, evaluate_labels,
    rand_index, threshold_labels, BinaryMetrics, MetricsReport, ThresholdMetric,
};
pub use persist::{decode_model, encode_model, load_model, save_model, ModelFile};
pub use report::{metrics_table, write_metrics_csv, write_training_log};
pub use synthetic::{gen_synthetic, Synthetic, SyntheticKind, SyntheticSpec};
