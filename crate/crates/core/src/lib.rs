//! Budget-aware retrieval gating.
//!
//! A query is routed to external retrieval only when the model's own
//! knowledge looks insufficient. Knowledgeability is measured with the
//! Thrust score: calibration embeddings are grouped by class, clustered with
//! k-means, and a query is scored by the norm of the size-weighted,
//! inverse-square-distance average of unit vectors pointing from the query
//! toward every centroid. Queries near a dense cluster score high; queries
//! far from everything, or caught between clusters pulling in opposite
//! directions, score low and are the first to get retrieval.
//!
//! The pipeline is split into stages that can be used on their own:
//!
//! - [`datastore`]: line-delimited sample, outcome and score files.
//! - [`clustering`]: per-class k-means++ and the frozen [`ClusterModel`].
//! - [`scoring`]: the Thrust score and its ablation variants.
//! - [`bm25`]: the average-relevance difficulty baseline.
//! - [`gating`]: percentile thresholds, budget-capped and random routing.
//! - [`evaluation`]: QA-F1 / accuracy, policy simulation, histograms.
//! - [`cli`]: the `thrust-gate` command line.
//!
//! See the crate's `examples/` directory for one runnable program per stage.

pub mod bm25;
pub mod cli;
pub mod clustering;
pub mod datastore;
mod error;
pub mod evaluation;
pub mod gating;
pub mod scoring;
pub mod synthetic;

pub use clustering::{build_cluster_model, choose_k, fit_kmeans, ClassClusters, ClusterModel};
pub use datastore::{EmbeddedSample, OutcomeRecord, SampleSet, Split, TaskType};
pub use error::{Error, Result};
pub use gating::{Budget, Direction, RoutingDecision, Threshold};
pub use scoring::{QueryScore, ScoreVariant, ThrustModel};
