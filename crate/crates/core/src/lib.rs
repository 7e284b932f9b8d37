//! Semi-supervised classification of wide tabular data through latent
//! similarity graphs.
//!
//! Instances become nodes, pairs whose cosine similarity reaches a threshold
//! become edges, and a two-layer graph convolutional network learns from the
//! labelled nodes while the unlabelled ones still shape the graph.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`). The unsuffixed
//! aliases at the crate root fix the scalar to `f64`.

pub mod baseline;
pub mod data;
pub mod error;
pub mod eval;
pub mod gcn;
pub mod graph_stats;
pub mod latent_graph;
pub mod linalg;
pub mod scalar;
pub mod stats_tests;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Matrix = linalg::Matrix<f64>;
pub type Dataset = data::Dataset<f64>;
pub type SimilarityMatrix = latent_graph::SimilarityMatrix<f64>;
pub type LatentGraph = latent_graph::LatentGraph<f64>;
pub type NormAdjacency = gcn::NormAdjacency<f64>;
pub type GcnModel = gcn::GcnModel<f64>;
pub type TrainResult = gcn::TrainResult<f64>;
pub type SvdProjection = baseline::SvdProjection<f64>;
pub type ScoreTable = stats_tests::ScoreTable<f64>;
pub type BayesResult = stats_tests::BayesResult<f64>;

pub use eval::{run_cv, EvalConfig, EvalReport, Method, ThetaMode};

pub type Dataset32 = data::Dataset<f32>;
pub type GcnModel32 = gcn::GcnModel<f32>;
