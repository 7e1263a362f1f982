//! Interpretable sleep staging.
//!
//! Deep-network embeddings of 30 s polysomnography epochs are mapped by ridge
//! regression onto a catalog of named, clinically meaningful features; the
//! z-normalized projection feeds simple classifiers whose decisions are
//! explained with Shapley attributions over the named dimensions.
//!
//! Pipeline: [`psg_io`] → [`features`] → [`select`] → [`embed`] →
//! [`project`] → [`models`] → [`metrics`] / [`explain`].
//!
//! Numeric types are generic over [`Real`] (`f32` or `f64`); the `*F64` and
//! `*F32` aliases below name the common instantiations.

mod container;
pub mod embed;
pub mod error;
pub mod explain;
pub mod features;
pub mod metrics;
pub mod models;
pub mod project;
pub mod psg_io;
pub mod scalar;
pub mod select;
pub mod synthetic;

pub use error::{Error, ErrorClass, Result};
pub use scalar::Real;

pub type FeatureMatrixF64 = features::FeatureMatrix<f64>;
pub type FeatureMatrixF32 = features::FeatureMatrix<f32>;
pub type EmbeddingMatrixF64 = embed::EmbeddingMatrix<f64>;
pub type EmbeddingMatrixF32 = embed::EmbeddingMatrix<f32>;
pub type ProjectionModelF64 = project::ProjectionModel<f64>;
pub type ProjectionModelF32 = project::ProjectionModel<f32>;
pub type LogisticModelF64 = models::LogisticModel<f64>;
pub type TreeModelF64 = models::TreeModel<f64>;
pub type BoostedEnsembleF64 = models::BoostedEnsemble<f64>;
pub type TrainedModelF64 = models::TrainedModel<f64>;
