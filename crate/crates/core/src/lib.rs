//! Per-sample classification complexity for labeled embeddings.
//!
//! Each class is summarized by its centroid and covariance. A sample's
//! complexity is the negative log of the softmax, over classes, of its
//! negated distances to every class, read off at its own class. The same
//! distances give a nearest-class baseline classifier and its accuracy, and
//! the scores feed a slice search that finds feature ranges where errors
//! concentrate.
//!
//! All numeric code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix the common `f64` instantiation.

pub mod analysis;
pub mod dataset;
pub mod error;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod scalar;
pub mod scoring;
pub mod synth;

pub use analysis::{
    dataset_stats, find_all_slices, find_slices_1d, find_slices_2d, median_class_size,
    normalized_entropy, rank_slices, slice_rank, AnalysisRow, AnalysisTable, DatasetStats, Slice,
    SliceConfig,
};
pub use dataset::{EmbeddedDataset, Sample};
pub use error::{Error, ErrorClass, ParseError, Result};
pub use geometry::{
    centroid, correlation_matrix, covariance_mle, covariance_unbiased, precision,
    shrink_ledoit_wolf, ClassGeometry, ClassParameters, Fallback, GeometryConfig, GeometryModel,
    PrecisionMode, Regularization, Shrinkage,
};
pub use linalg::Matrix;
pub use scalar::Scalar;
pub use scoring::{
    baseline_accuracy, baseline_predict, class_distances, complexity, complexity_from_distances,
    distance, ood_score, score_dataset, ComplexityRecord, DistanceKind,
};
pub use synth::{
    exact_model, generate, heatmap, heatmap_value, padded_bounds, preset, GaussianSpec, HeatmapGrid, HeatmapValue, LabelMode,
    Preset, DEFAULT_SEED, PRESET_COUNT,
};

pub type Dataset = EmbeddedDataset<f64>;
pub type Model = GeometryModel<f64>;
pub type Geometry = ClassGeometry<f64>;
pub type Record = ComplexityRecord<f64>;
pub type Grid = HeatmapGrid<f64>;

pub type Dataset32 = EmbeddedDataset<f32>;
pub type Model32 = GeometryModel<f32>;
pub type Record32 = ComplexityRecord<f32>;
