//! Policy simulation over cached outcomes, answer metrics and score
//! histograms.
//!
//! Answers are normalized the SQuAD way before comparison: lowercase,
//! punctuation dropped, the articles `a`, `an`, `the` removed, then split on
//! whitespace. Reports record this as `"normalization": "squad"`.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datastore::{self, OutcomeRecord, TaskType};
use crate::error::{Error, Result};
use crate::gating::{self, Budget, Direction, RoutingDecision};
use crate::scoring::QueryScore;

pub const NORMALIZATION: &str = "squad";
pub const DEFAULT_POLICY: &str = "default";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Accuracy,
    QaF1,
}

impl Metric {
    pub fn for_task(task_type: TaskType) -> Self {
        match task_type {
            TaskType::Classification => Metric::Accuracy,
            TaskType::Generation => Metric::QaF1,
        }
    }

    pub fn evaluate(self, prediction: &str, gold_answers: &[String]) -> Result<f64> {
        match self {
            Metric::Accuracy => accuracy(prediction, gold_answers),
            Metric::QaF1 => qa_f1(prediction, gold_answers),
        }
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "accuracy" => Ok(Metric::Accuracy),
            "qa_f1" | "qa-f1" => Ok(Metric::QaF1),
            _ => Err(Error::InvalidArgument(format!("unknown metric {s:?}"))),
        }
    }
}

pub fn normalize_answer(text: &str) -> Vec<String> {
    let lowered: String = text
        .to_lowercase()
        .chars()
        .filter(|c| c.is_alphanumeric() || c.is_whitespace())
        .collect();
    lowered
        .split_whitespace()
        .filter(|t| !matches!(*t, "a" | "an" | "the"))
        .map(str::to_owned)
        .collect()
}

fn token_f1(pred: &[String], gold: &[String]) -> f64 {
    if pred.is_empty() && gold.is_empty() {
        return 1.0;
    }
    let mut counts: HashMap<&str, usize> = HashMap::new();
    for t in gold {
        *counts.entry(t).or_default() += 1;
    }
    let mut overlap = 0usize;
    for t in pred {
        if let Some(c) = counts.get_mut(t.as_str()) {
            if *c > 0 {
                *c -= 1;
                overlap += 1;
            }
        }
    }
    if overlap == 0 {
        return 0.0;
    }
    let precision = overlap as f64 / pred.len() as f64;
    let recall = overlap as f64 / gold.len() as f64;
    2.0 * precision * recall / (precision + recall)
}

/// Best unigram-multiset F1 against any gold answer.
pub fn qa_f1(prediction: &str, gold_answers: &[String]) -> Result<f64> {
    if gold_answers.is_empty() {
        return Err(Error::Empty("gold answers"));
    }
    let pred = normalize_answer(prediction);
    Ok(gold_answers
        .iter()
        .map(|g| token_f1(&pred, &normalize_answer(g)))
        .fold(0.0, f64::max))
}

/// 1.0 when the normalized prediction equals some normalized gold answer.
pub fn accuracy(prediction: &str, gold_answers: &[String]) -> Result<f64> {
    if gold_answers.is_empty() {
        return Err(Error::Empty("gold answers"));
    }
    let pred = normalize_answer(prediction);
    Ok(if gold_answers.iter().any(|g| normalize_answer(g) == pred) {
        1.0
    } else {
        0.0
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub policy: String,
    pub budget_fraction: f64,
    pub metric: Metric,
    pub value: f64,
    pub n_total: usize,
    pub n_retrieved: usize,
    pub seed: Option<u64>,
    pub normalization: String,
}

/// Scores `pred_with` for retrieving decisions and `pred_without` otherwise,
/// and averages the metric over the decisions.
pub fn simulate_policy(
    policy: &str,
    budget_fraction: f64,
    outcomes: &[OutcomeRecord],
    decisions: &[RoutingDecision],
    metric: Metric,
) -> Result<EvalReport> {
    if decisions.is_empty() {
        return Err(Error::Empty("decision list"));
    }
    let by_id: HashMap<&str, &OutcomeRecord> = outcomes.iter().map(|o| (o.id.as_str(), o)).collect();
    let mut total = 0.0;
    let mut n_retrieved = 0;
    for d in decisions {
        let record = by_id
            .get(d.id.as_str())
            .ok_or_else(|| Error::MissingOutcome { id: d.id.clone() })?;
        let pred = if d.retrieve {
            n_retrieved += 1;
            &record.pred_with
        } else {
            &record.pred_without
        };
        total += metric.evaluate(pred, &record.gold_answers)?;
    }
    Ok(EvalReport {
        policy: policy.to_owned(),
        budget_fraction,
        metric,
        value: total / decisions.len() as f64,
        n_total: decisions.len(),
        n_retrieved,
        seed: None,
        normalization: NORMALIZATION.to_owned(),
    })
}

/// Scores of one routing policy over the outcome ids.
#[derive(Debug, Clone)]
pub struct PolicyScores {
    pub name: String,
    pub scores: Vec<QueryScore>,
    pub direction: Direction,
}

impl PolicyScores {
    pub fn new(name: impl Into<String>, scores: Vec<QueryScore>, direction: Direction) -> Self {
        Self {
            name: name.into(),
            scores,
            direction,
        }
    }
}

/// One report per (policy, budget): the random [`DEFAULT_POLICY`] first,
/// then `policies` in the given order. Every policy routes exactly
/// `floor(fraction * n)` of the outcome ids.
pub fn compare_policies(
    outcomes: &[OutcomeRecord],
    policies: &[PolicyScores],
    budgets: &[Budget],
    metric: Metric,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    let ids: Vec<&str> = outcomes.iter().map(|o| o.id.as_str()).collect();
    let aligned = policies
        .iter()
        .map(|p| {
            let by_id: HashMap<&str, f64> = p.scores.iter().map(|s| (s.id.as_str(), s.score)).collect();
            ids.iter()
                .map(|&id| {
                    by_id
                        .get(id)
                        .map(|&score| QueryScore::new(id, score))
                        .ok_or_else(|| Error::CoverageGap {
                            policy: p.name.clone(),
                            id: id.to_owned(),
                        })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;

    let mut reports = Vec::with_capacity((policies.len() + 1) * budgets.len());
    for &budget in budgets {
        let decisions = gating::random_route(&ids, budget, seed);
        let mut report = simulate_policy(DEFAULT_POLICY, budget.fraction(), outcomes, &decisions, metric)?;
        report.seed = Some(seed);
        reports.push(report);
    }
    for (policy, scores) in policies.iter().zip(&aligned) {
        for &budget in budgets {
            let decisions = gating::route_budgeted(scores, budget, policy.direction);
            reports.push(simulate_policy(&policy.name, budget.fraction(), outcomes, &decisions, metric)?);
        }
    }
    Ok(reports)
}

/// Hindsight routing: retrieve the instances whose metric gains most from
/// knowledge, never more than `floor(fraction * n)` and only with positive
/// gain. No policy with the same budget cap can beat it.
pub fn oracle_route(outcomes: &[OutcomeRecord], budget: Budget, metric: Metric) -> Result<Vec<RoutingDecision>> {
    let gains = outcomes
        .iter()
        .map(|o| {
            Ok(metric.evaluate(&o.pred_with, &o.gold_answers)? - metric.evaluate(&o.pred_without, &o.gold_answers)?)
        })
        .collect::<Result<Vec<f64>>>()?;
    let scores: Vec<QueryScore> = outcomes
        .iter()
        .zip(&gains)
        .map(|(o, &g)| QueryScore::new(o.id.clone(), g))
        .collect();
    let mut decisions = gating::route_budgeted(&scores, budget, Direction::HighFirst);
    for d in &mut decisions {
        d.retrieve &= d.score > 0.0;
    }
    Ok(decisions)
}

pub fn write_reports(path: impl AsRef<Path>, reports: &[EvalReport]) -> Result<()> {
    datastore::write_jsonl(path, reports)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<usize>,
}

impl Histogram {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    /// `bin_lower,bin_upper,count` rows under a header line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lower,bin_upper,count\n");
        for (i, count) in self.counts.iter().enumerate() {
            let _ = writeln!(out, "{},{},{}", self.bin_edges[i], self.bin_edges[i + 1], count);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        datastore::write_atomic(path, self.to_csv().as_bytes())
    }
}

/// Equal-width bins over `[min, max]`; the maximum lands in the last bin.
/// When every score is equal the histogram collapses to one bin.
pub fn score_histogram(scores: &[QueryScore], bins: usize) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if bins == 0 {
        return Err(Error::InvalidArgument("bins must be positive".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(Error::NonFiniteScore { id: bad.id.clone() });
    }
    let (min, max) = scores
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), s| (lo.min(s.score), hi.max(s.score)));
    if min == max {
        return Ok(Histogram {
            bin_edges: vec![min, max],
            counts: vec![scores.len()],
        });
    }
    let width = (max - min) / bins as f64;
    let mut bin_edges: Vec<f64> = (0..bins).map(|i| min + width * i as f64).collect();
    bin_edges.push(max);
    let mut counts = vec![0usize; bins];
    for s in scores {
        let idx = (((s.score - min) / width) as usize).min(bins - 1);
        counts[idx] += 1;
    }
    Ok(Histogram { bin_edges, counts })
}
