//! Weakly supervised classification through spectral grouping.
//!
//! Pipeline: [`dataset`] ingestion and distances, [`simgraph`] similarity
//! graphs (including the probabilistic threshold and criterion models),
//! [`spectral`] grouping, [`weakanno`] weak labelling of unlabelled bag
//! members, [`classify`] training and leave-one-bag-out evaluation, and
//! [`eval`] validity indices and grid search. [`experiments`] bundles the
//! reproducible suites.

// index loops mirror the matrix algebra
#![allow(clippy::needless_range_loop)]

pub mod classify;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiments;
pub mod kmeans;
pub mod simgraph;
pub mod spectral;
pub mod synth;
pub mod weakanno;

pub use classify::{
    fully_supervised_baseline, leave_one_bag_out_cv, Aggregation, ClassifierKind, ClassifierModel, CvOptions, CvResult,
};
pub use dataset::{load_csv, pairwise_distances, standardize, Dataset, DistanceMatrix, Schema};
pub use error::{Error, Result};
pub use eval::{davies_bouldin, f1_score, grid_search, GridSearchResult, GridSpec, IndexName, SearchOptions};
pub use kmeans::{kmeans, KMeansConfig};
pub use simgraph::{GraphModel, GraphSpec, KnnMode, SimilarityGraph, Symmetrize};
pub use spectral::{spectral_grouping, Grouping, LaplacianKind};
pub use synth::{synth_bags, SynthConfig};
pub use weakanno::{build_training_set, AnnotatedTrainingSet, GraphSelection, Provenance, WeakConfig};
