//! The Thrust knowledgeability score.
//!
//! For a query embedding `q` and every centroid `m` of every class, let
//! `d = m - q`. The full score is
//!
//! ```text
//! ‖ 1/(N·K) · Σ size(m) / ‖d‖² · d/‖d‖ ‖
//! ```
//!
//! with `N` the number of classes and `K` the model's nominal cluster count.
//! `‖d‖` is clamped below by the model's distance floor before it enters the
//! weight, so a query sitting on a centroid gets a very large but finite
//! score. A term whose direction is undefined (`d` exactly zero) is added
//! along the resultant of the other terms.
//!
//! The ablation variants change one ingredient each:
//!
//! | variant                   | weight                 | direction |
//! |---------------------------|------------------------|-----------|
//! | `full`                    | size / ‖d‖²            | unit d    |
//! | `without_cluster_size`    | 1 / ‖d‖²               | unit d    |
//! | `without_direction`       | size / ‖d‖² (scalar)   | none      |
//! | `without_distance`        | size                   | unit d    |
//! | `cosine_distance`         | size / (1 - cos(q,m))² | unit d    |
//! | `cluster_size_to_inertia` | inertia / ‖d‖²         | unit d    |

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::ClusterModel;
use crate::datastore::SampleSet;
use crate::error::{Error, Result};

pub const DEFAULT_DISTANCE_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreVariant {
    #[default]
    Full,
    WithoutClusterSize,
    WithoutDirection,
    WithoutDistance,
    CosineDistance,
    ClusterSizeToInertia,
}

impl ScoreVariant {
    pub const ALL: [ScoreVariant; 6] = [
        ScoreVariant::Full,
        ScoreVariant::WithoutClusterSize,
        ScoreVariant::WithoutDirection,
        ScoreVariant::WithoutDistance,
        ScoreVariant::CosineDistance,
        ScoreVariant::ClusterSizeToInertia,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScoreVariant::Full => "full",
            ScoreVariant::WithoutClusterSize => "without_cluster_size",
            ScoreVariant::WithoutDirection => "without_direction",
            ScoreVariant::WithoutDistance => "without_distance",
            ScoreVariant::CosineDistance => "cosine_distance",
            ScoreVariant::ClusterSizeToInertia => "cluster_size_to_inertia",
        }
    }
}

impl fmt::Display for ScoreVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScoreVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScoreVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown score variant {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryScore {
    pub id: String,
    pub score: f64,
}

impl QueryScore {
    pub fn new(id: impl Into<String>, score: f64) -> Self {
        Self {
            id: id.into(),
            score,
        }
    }
}

/// A cluster model paired with a score variant. Immutable once built.
#[derive(Debug, Clone)]
pub struct ThrustModel {
    clusters: ClusterModel,
    variant: ScoreVariant,
    distance_floor: f64,
}

impl ThrustModel {
    pub fn new(clusters: ClusterModel, variant: ScoreVariant) -> Result<Self> {
        Self::with_floor(clusters, variant, DEFAULT_DISTANCE_FLOOR)
    }

    pub fn with_floor(clusters: ClusterModel, variant: ScoreVariant, distance_floor: f64) -> Result<Self> {
        if !(distance_floor > 0.0 && distance_floor.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "distance floor must be positive and finite, got {distance_floor}"
            )));
        }
        clusters.validate()?;
        Ok(Self {
            clusters,
            variant,
            distance_floor,
        })
    }

    pub fn clusters(&self) -> &ClusterModel {
        &self.clusters
    }

    pub fn variant(&self) -> ScoreVariant {
        self.variant
    }

    pub fn distance_floor(&self) -> f64 {
        self.distance_floor
    }

    pub fn dim(&self) -> usize {
        self.clusters.dim
    }

    /// Scores one query embedding. Work is one pass over the `N·K` centroids.
    pub fn score(&self, embedding: &[f64]) -> Result<f64> {
        let dim = self.clusters.dim;
        if embedding.len() != dim {
            return Err(Error::QueryDimension {
                expected: dim,
                found: embedding.len(),
            });
        }
        if embedding.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteQuery);
        }

        let query_norm = if self.variant == ScoreVariant::CosineDistance {
            norm(embedding)
        } else {
            0.0
        };
        let mut resultant = vec![0.0; dim];
        let mut diff = vec![0.0; dim];
        // magnitude of terms whose direction is undefined, or of every term
        // when the variant has no direction
        let mut scalar = 0.0;

        for class in &self.clusters.classes {
            for ((centroid, &size), &inertia) in class.centroids.iter().zip(&class.sizes).zip(&class.inertias) {
                for ((d, m), q) in diff.iter_mut().zip(centroid).zip(embedding) {
                    *d = m - q;
                }
                let dist = norm(&diff);
                let mass = match self.variant {
                    ScoreVariant::WithoutClusterSize => 1.0,
                    ScoreVariant::ClusterSizeToInertia => inertia,
                    _ => size as f64,
                };
                let weight = match self.variant {
                    ScoreVariant::WithoutDistance => mass,
                    ScoreVariant::CosineDistance => {
                        let cos = cosine(embedding, query_norm, centroid);
                        let r = (1.0 - cos).max(self.distance_floor);
                        mass / (r * r)
                    }
                    _ => {
                        let r = dist.max(self.distance_floor);
                        mass / (r * r)
                    }
                };
                if self.variant == ScoreVariant::WithoutDirection || dist == 0.0 {
                    scalar += weight;
                } else {
                    let scale = weight / dist;
                    for (acc, d) in resultant.iter_mut().zip(&diff) {
                        *acc += scale * d;
                    }
                }
            }
        }

        let nk = (self.clusters.n_classes() * self.clusters.k_nominal) as f64;
        Ok((norm(&resultant) + scalar) / nk)
    }

    /// Scores every sample in input order. Work may be spread over the
    /// rayon pool; the result equals mapping [`ThrustModel::score`].
    pub fn score_batch(&self, samples: &SampleSet) -> Result<Vec<QueryScore>> {
        samples
            .samples()
            .par_iter()
            .map(|s| {
                self.score(&s.embedding)
                    .map(|score| QueryScore::new(s.id.clone(), score))
                    .map_err(|e| Error::Sample {
                        id: s.id.clone(),
                        source: Box::new(e),
                    })
            })
            .collect()
    }
}

/// Free-function form of [`ThrustModel::score`].
pub fn thrust_score(model: &ThrustModel, embedding: &[f64]) -> Result<f64> {
    model.score(embedding)
}

pub fn score_batch(model: &ThrustModel, samples: &SampleSet) -> Result<Vec<QueryScore>> {
    model.score_batch(samples)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn cosine(q: &[f64], q_norm: f64, m: &[f64]) -> f64 {
    let m_norm = norm(m);
    if q_norm == 0.0 || m_norm == 0.0 {
        return 0.0;
    }
    let dot: f64 = q.iter().zip(m).map(|(a, b)| a * b).sum();
    (dot / (q_norm * m_norm)).clamp(-1.0, 1.0)
}
