//! Turning scores into retrieve / skip decisions.
//!
//! Three routers share the [`RoutingDecision`] output:
//!
//! - [`route_threshold`] retrieves every instance scoring at or below a
//!   threshold, usually one set by [`calibrate_threshold`] as a nearest-rank
//!   percentile of calibration scores.
//! - [`route_budgeted`] retrieves exactly `floor(fraction * n)` instances,
//!   ranked by score with ties broken by id.
//! - [`random_route`] is the uninformed baseline at the same budget.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::datastore;
use crate::error::{Error, Result};
use crate::scoring::QueryScore;

/// Share of instances allowed to use external knowledge.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Budget(f64);

impl Budget {
    pub const SCARCE: Budget = Budget(0.25);
    pub const MEDIUM: Budget = Budget(0.50);
    pub const ABUNDANT: Budget = Budget(0.75);

    pub fn new(fraction: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&fraction) {
            Ok(Budget(fraction))
        } else {
            Err(Error::InvalidArgument(format!("budget fraction must be in [0, 1], got {fraction}")))
        }
    }

    pub fn fraction(self) -> f64 {
        self.0
    }

    /// `floor(fraction * n)`, tolerant of products like `0.1 * 30` landing a
    /// hair off an integer.
    pub fn floor_count(self, n: usize) -> usize {
        let x = self.0 * n as f64;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.floor() as usize
        }
    }

    /// `ceil(fraction * n)`, with the same tolerance as [`Budget::floor_count`].
    pub fn ceil_count(self, n: usize) -> usize {
        let x = self.0 * n as f64;
        let r = x.round();
        if (x - r).abs() < 1e-9 {
            r as usize
        } else {
            x.ceil() as usize
        }
    }
}

impl<'de> Deserialize<'de> for Budget {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        Budget::new(f64::deserialize(d)?).map_err(serde::de::Error::custom)
    }
}

impl FromStr for Budget {
    type Err = Error;

    /// Accepts `scarce`, `medium`, `abundant`, or a fraction such as `0.3`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "scarce" => Ok(Budget::SCARCE),
            "medium" => Ok(Budget::MEDIUM),
            "abundant" => Ok(Budget::ABUNDANT),
            _ => s
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("unknown budget {s:?}")))
                .and_then(Budget::new),
        }
    }
}

impl fmt::Display for Budget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ThresholdSource {
    Percentile,
    Manual,
}

/// Retrieval threshold. `lambda` may be `-inf` (nobody retrieves) or `+inf`
/// (everybody retrieves); these serialize as the strings `"-inf"` / `"inf"`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Threshold {
    #[serde(serialize_with = "ser_lambda", deserialize_with = "de_lambda")]
    pub lambda: f64,
    pub budget: Option<Budget>,
    pub source: ThresholdSource,
}

impl Threshold {
    pub fn manual(lambda: f64) -> Result<Self> {
        if lambda.is_nan() {
            return Err(Error::InvalidArgument("threshold must not be NaN".into()));
        }
        Ok(Self {
            lambda,
            budget: None,
            source: ThresholdSource::Manual,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        datastore::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        datastore::read_json(path)
    }
}

fn ser_lambda<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn de_lambda<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(v) => Ok(v),
        Raw::Str(s) if s == "inf" => Ok(f64::INFINITY),
        Raw::Str(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
        Raw::Str(s) => Err(serde::de::Error::custom(format!("invalid lambda {s:?}"))),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub id: String,
    pub retrieve: bool,
    pub score: f64,
}

/// Which end of the score ranking is routed to retrieval first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Direction {
    /// Low scores first (Thrust: low knowledgeability).
    #[default]
    LowFirst,
    HighFirst,
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low-first" | "low_first" => Ok(Direction::LowFirst),
            "high-first" | "high_first" => Ok(Direction::HighFirst),
            _ => Err(Error::InvalidArgument(format!("unknown direction {s:?}"))),
        }
    }
}

/// Nearest-rank percentile: `lambda` is the `ceil(fraction * n)`-th smallest
/// score, or `-inf` for a zero budget.
pub fn calibrate_threshold(calibration_scores: &[QueryScore], budget: Budget) -> Result<Threshold> {
    if calibration_scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if let Some(bad) = calibration_scores.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFiniteScore { id: bad.id.clone() });
    }
    let mut sorted: Vec<f64> = calibration_scores.iter().map(|s| s.score).collect();
    sorted.sort_by(f64::total_cmp);
    let rank = budget.ceil_count(sorted.len());
    let lambda = if rank == 0 {
        f64::NEG_INFINITY
    } else {
        sorted[rank - 1]
    };
    Ok(Threshold {
        lambda,
        budget: Some(budget),
        source: ThresholdSource::Percentile,
    })
}

/// Retrieves every instance with `score <= lambda`.
pub fn route_threshold(scores: &[QueryScore], threshold: &Threshold) -> Vec<RoutingDecision> {
    scores
        .iter()
        .map(|s| RoutingDecision {
            id: s.id.clone(),
            retrieve: s.score <= threshold.lambda,
            score: s.score,
        })
        .collect()
}

/// Retrieves exactly `floor(fraction * n)` instances from the chosen end of
/// the ranking. Ties go to the lexicographically smaller id. Decisions come
/// back in input order.
pub fn route_budgeted(scores: &[QueryScore], budget: Budget, direction: Direction) -> Vec<RoutingDecision> {
    let keys: Vec<(f64, &str)> = scores.iter().map(|s| (s.score, s.id.as_str())).collect();
    select_lowest(&keys, budget.floor_count(scores.len()), direction)
        .into_iter()
        .zip(scores)
        .map(|(retrieve, s)| RoutingDecision {
            id: s.id.clone(),
            retrieve,
            score: s.score,
        })
        .collect()
}

fn select_lowest(keys: &[(f64, &str)], count: usize, direction: Direction) -> Vec<bool> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| {
        let by_score = match direction {
            Direction::LowFirst => keys[a].0.total_cmp(&keys[b].0),
            Direction::HighFirst => keys[b].0.total_cmp(&keys[a].0),
        };
        by_score
            .then_with(|| keys[a].1.cmp(keys[b].1))
            .then(a.cmp(&b))
    });
    let mut selected = vec![false; keys.len()];
    for &i in order.iter().take(count) {
        selected[i] = true;
    }
    selected
}

/// Uniformly samples `floor(fraction * n)` ids without replacement.
///
/// Each id draws a priority from a stream seeded by `seed` and the lowest
/// priorities retrieve; the priority is reported as the decision's score.
/// For a fixed seed and id list, a larger budget selects a superset.
pub fn random_route<S: AsRef<str>>(ids: &[S], budget: Budget, seed: u64) -> Vec<RoutingDecision> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let priorities: Vec<f64> = ids.iter().map(|_| rng.random::<f64>()).collect();
    let keys: Vec<(f64, &str)> = priorities.iter().zip(ids).map(|(&p, id)| (p, id.as_ref())).collect();
    select_lowest(&keys, budget.floor_count(ids.len()), Direction::LowFirst)
        .into_iter()
        .zip(keys)
        .map(|(retrieve, (score, id))| RoutingDecision {
            id: id.to_owned(),
            retrieve,
            score,
        })
        .collect()
}

pub fn write_routing(path: impl AsRef<Path>, decisions: &[RoutingDecision]) -> Result<()> {
    datastore::write_jsonl(path, decisions)
}

pub fn load_routing(path: impl AsRef<Path>) -> Result<Vec<RoutingDecision>> {
    let records: Vec<(usize, RoutingDecision)> = datastore::read_jsonl(path)?;
    let mut seen = std::collections::HashSet::new();
    records
        .into_iter()
        .map(|(line, d)| {
            if seen.insert(d.id.clone()) {
                Ok(d)
            } else {
                Err(Error::DuplicateId { line, id: d.id })
            }
        })
        .collect()
}
