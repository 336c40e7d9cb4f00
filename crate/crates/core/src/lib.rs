//! Refined motif discovery over daily sub-patterns of smart-meter import
//! series, with a single-neuron classifier, intuitive baselines, a synthetic
//! population generator and an evaluation harness.
//!
//! The usual flow is [`ingest_csv`] and [`clean_series`], then
//! [`segment_days`], then [`refined_motif`] per consumer, then
//! [`classifier::train`] and [`classifier::predict`] on the motifs. The
//! [`pipeline`] module wires these stages to files.

pub mod baselines;
pub mod classifier;
pub mod datagen;
pub mod distance;
pub mod error;
pub mod eval;
pub mod exec;
mod fsutil;
pub mod ingest;
pub mod mask;
pub mod motif;
pub mod pipeline;
pub mod series;

pub use classifier::{predict, rank_consumers, ClassifierModel, Prediction, TrainConfig};
pub use datagen::{emit_low_ratio_cohort, simulate_population, GroundTruth, PopulationConfig, Scenario};
pub use distance::{dtw, euclidean, r_dtw, z_normalize};
pub use error::{Error, Result};
pub use exec::Execution;
pub use ingest::{ingest_csv, CsvSchema};
pub use mask::{build_weight_matrix, MaskSpec, WeightMatrix};
pub use motif::{
    distance_table, extract_motif, matrix_profile_motif, refined_motif, similarity_profile, update_motif,
    DistanceTable, Motif, MotifMethod, MotifState, SimilarityProfile, Threshold,
};
pub use series::{clean_series, segment_days, CleaningPolicy, ConsumerSeries, DayMatrix};
