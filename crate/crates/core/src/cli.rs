//! The `thrust-gate` command line.
//!
//! Exit codes: 0 on success, 1 on a domain or validation error (message on
//! stderr), 2 on a usage error. `THRUST_GATE_THREADS` caps the worker pool
//! used for scoring and per-class clustering (0 or unset = one per core).

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use crate::bm25::{self, Difficulty};
use crate::clustering::{build_cluster_model, ClusterModel};
use crate::datastore::{self, OutcomeRecord, Split};
use crate::error::Error;
use crate::evaluation::{self, Metric, PolicyScores};
use crate::gating::{self, Budget, Direction, Threshold};
use crate::scoring::{ScoreVariant, ThrustModel};

pub const THREADS_ENV: &str = "THRUST_GATE_THREADS";
pub const DEFAULT_SEED: u64 = 13;

#[derive(Debug, Parser)]
#[command(name = "thrust-gate", version, about = "Budget-aware retrieval gating")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SplitArg {
    All,
    Calibration,
    Test,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Cluster the calibration split of a samples file.
    Fit {
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Clusters per class instead of the calibration-size rule.
        #[arg(long = "k")]
        k_override: Option<usize>,
    },
    /// Thrust-score samples against a fitted model.
    Score {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        samples: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value = "full")]
        variant: ScoreVariant,
        #[arg(long, value_enum, default_value = "all")]
        split: SplitArg,
        #[arg(long, default_value_t = crate::scoring::DEFAULT_DISTANCE_FLOOR)]
        distance_floor: f64,
    },
    /// Set a percentile threshold from calibration scores.
    Calibrate {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long)]
        budget: Budget,
        #[arg(long)]
        out: PathBuf,
    },
    /// Route by threshold file or by budget-capped ranking.
    Route {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, conflicts_with = "budget", required_unless_present = "budget")]
        threshold: Option<PathBuf>,
        #[arg(long)]
        budget: Option<Budget>,
        #[arg(long, default_value = "low-first")]
        direction: Direction,
        #[arg(long)]
        out: PathBuf,
    },
    /// Random routing baseline over the ids of any record file.
    RandomRoute {
        #[arg(long)]
        ids: PathBuf,
        #[arg(long)]
        budget: Budget,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Average BM25 relevance of each query against a training corpus.
    BaselineBm25 {
        #[arg(long)]
        corpus: PathBuf,
        #[arg(long)]
        queries: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = bm25::DEFAULT_K1)]
        k1: f64,
        #[arg(long, default_value_t = bm25::DEFAULT_B)]
        b: f64,
    },
    /// Evaluate one routing file against cached outcomes.
    Evaluate {
        #[arg(long)]
        outcomes: PathBuf,
        #[arg(long)]
        routing: PathBuf,
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long, default_value = "custom")]
        policy: String,
        /// Budget recorded in the report; defaults to the realized fraction.
        #[arg(long)]
        budget: Option<Budget>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare policies against the random baseline at several budgets.
    Compare {
        #[arg(long)]
        outcomes: PathBuf,
        /// NAME=SCORES, routed lowest score first. Repeatable.
        #[arg(long = "policy", value_parser = parse_policy)]
        policies: Vec<(String, PathBuf)>,
        /// BM25 scores file, added as policy "bm25".
        #[arg(long)]
        bm25: Option<PathBuf>,
        #[arg(long, default_value = "low-relevance")]
        difficulty: Difficulty,
        #[arg(long, value_delimiter = ',', default_value = "scarce,medium,abundant")]
        budgets: Vec<Budget>,
        #[arg(long)]
        metric: Option<Metric>,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Histogram of a scores file as CSV.
    Distribution {
        #[arg(long)]
        scores: PathBuf,
        #[arg(long, default_value_t = 20)]
        bins: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_policy(s: &str) -> Result<(String, PathBuf), String> {
    match s.split_once('=') {
        Some((name, path)) if !name.is_empty() && !path.is_empty() => Ok((name.to_owned(), PathBuf::from(path))),
        _ => Err(format!("expected NAME=PATH, got {s:?}")),
    }
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{kind} file not found: {}", path.display())]
    NotFound { kind: &'static str, path: PathBuf },
    #[error("invalid {THREADS_ENV}: {0:?}")]
    Threads(String),
    #[error(transparent)]
    Domain(#[from] Error),
}

type CliResult<T> = Result<T, CliError>;

/// Parses `argv` (including the program name) and runs the subcommand.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match with_pool(|| execute(cli.command)) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn with_pool(f: impl FnOnce() -> CliResult<()> + Send) -> CliResult<()> {
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => v.trim().parse::<usize>().map_err(|_| CliError::Threads(v))?,
        Err(_) => 0,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| CliError::Threads(e.to_string()))?;
    pool.install(f)
}

fn require(kind: &'static str, path: &Path) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::NotFound {
            kind,
            path: path.to_owned(),
        })
    }
}

fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Fit {
            samples,
            out,
            seed,
            k_override,
        } => {
            require("samples", &samples)?;
            let set = datastore::load_samples(&samples)?;
            let model = build_cluster_model(&set, k_override, seed)?;
            model.save(&out)?;
            eprintln!(
                "fit: {} classes, k={}, seed={} -> {}",
                model.n_classes(),
                model.k_nominal,
                seed,
                out.display()
            );
        }
        Command::Score {
            model,
            samples,
            out,
            variant,
            split,
            distance_floor,
        } => {
            require("model", &model)?;
            require("samples", &samples)?;
            let clusters = ClusterModel::load(&model)?;
            let thrust = ThrustModel::with_floor(clusters, variant, distance_floor)?;
            let set = datastore::load_samples(&samples)?;
            let set = match split {
                SplitArg::All => set,
                SplitArg::Calibration => set.only(Split::Calibration).ok_or(Error::Empty("calibration split"))?,
                SplitArg::Test => set.only(Split::Test).ok_or(Error::Empty("test split"))?,
            };
            let scores = thrust.score_batch(&set)?;
            datastore::write_scores(&out, &scores)?;
            eprintln!("score: {} queries ({variant}) -> {}", scores.len(), out.display());
        }
        Command::Calibrate { scores, budget, out } => {
            require("scores", &scores)?;
            let threshold = gating::calibrate_threshold(&datastore::load_scores(&scores)?, budget)?;
            threshold.save(&out)?;
            eprintln!("calibrate: lambda={} at budget {budget} -> {}", threshold.lambda, out.display());
        }
        Command::Route {
            scores,
            threshold,
            budget,
            direction,
            out,
        } => {
            require("scores", &scores)?;
            let scores = datastore::load_scores(&scores)?;
            let decisions = match (threshold, budget) {
                (Some(path), _) => {
                    require("threshold", &path)?;
                    gating::route_threshold(&scores, &Threshold::load(&path)?)
                }
                (None, Some(budget)) => gating::route_budgeted(&scores, budget, direction),
                (None, None) => unreachable!("clap requires --threshold or --budget"),
            };
            gating::write_routing(&out, &decisions)?;
            report_routing("route", &decisions, &out);
        }
        Command::RandomRoute { ids, budget, seed, out } => {
            require("ids", &ids)?;
            let ids = datastore::load_ids(&ids)?;
            let decisions = gating::random_route(&ids, budget, seed);
            gating::write_routing(&out, &decisions)?;
            eprintln!("random-route: seed={seed}");
            report_routing("random-route", &decisions, &out);
        }
        Command::BaselineBm25 {
            corpus,
            queries,
            out,
            k1,
            b,
        } => {
            require("corpus", &corpus)?;
            require("queries", &queries)?;
            let docs: Vec<String> = read_texts(&corpus)?.into_iter().map(|(_, t)| t).collect();
            let index = bm25::build_index(&docs, k1, b)?;
            let queries: Vec<(String, String)> = read_texts(&queries)?
                .into_iter()
                .map(|(id, t)| id.map(|id| (id, t.clone())))
                .collect::<Result<_, _>>()?;
            let scores = index.score_queries(&queries);
            datastore::write_scores(&out, &scores)?;
            eprintln!("baseline-bm25: {} queries over {} docs -> {}", scores.len(), index.n_docs(), out.display());
        }
        Command::Evaluate {
            outcomes,
            routing,
            metric,
            policy,
            budget,
            out,
        } => {
            require("outcomes", &outcomes)?;
            require("routing", &routing)?;
            let outcomes = datastore::load_outcomes(&outcomes)?;
            let decisions = gating::load_routing(&routing)?;
            let metric = resolve_metric(metric, &outcomes)?;
            let mut report = evaluation::simulate_policy(&policy, 0.0, &outcomes, &decisions, metric)?;
            report.budget_fraction = match budget {
                Some(b) => b.fraction(),
                None => report.n_retrieved as f64 / report.n_total as f64,
            };
            evaluation::write_reports(&out, std::slice::from_ref(&report))?;
            eprintln!("evaluate: {policy} {:?} = {:.4} -> {}", metric, report.value, out.display());
        }
        Command::Compare {
            outcomes,
            policies,
            bm25,
            difficulty,
            budgets,
            metric,
            seed,
            out,
        } => {
            require("outcomes", &outcomes)?;
            let outcomes = datastore::load_outcomes(&outcomes)?;
            let metric = resolve_metric(metric, &outcomes)?;
            let mut loaded = Vec::new();
            for (name, path) in policies {
                require("scores", &path)?;
                loaded.push(PolicyScores::new(name, datastore::load_scores(&path)?, Direction::LowFirst));
            }
            if let Some(path) = bm25 {
                require("bm25 scores", &path)?;
                loaded.push(PolicyScores::new("bm25", datastore::load_scores(&path)?, difficulty.direction()));
            }
            let reports = evaluation::compare_policies(&outcomes, &loaded, &budgets, metric, seed)?;
            evaluation::write_reports(&out, &reports)?;
            for r in &reports {
                eprintln!("{:>10} @ {:<5} {:.4}", r.policy, r.budget_fraction, r.value);
            }
        }
        Command::Distribution { scores, bins, out } => {
            require("scores", &scores)?;
            let hist = evaluation::score_histogram(&datastore::load_scores(&scores)?, bins)?;
            hist.write_csv(&out)?;
            eprintln!("distribution: {} bins -> {}", hist.counts.len(), out.display());
        }
    }
    Ok(())
}

fn report_routing(cmd: &str, decisions: &[gating::RoutingDecision], out: &Path) {
    let n = decisions.iter().filter(|d| d.retrieve).count();
    eprintln!("{cmd}: {n}/{} retrieve -> {}", decisions.len(), out.display());
}

fn resolve_metric(metric: Option<Metric>, outcomes: &[OutcomeRecord]) -> CliResult<Metric> {
    if let Some(m) = metric {
        return Ok(m);
    }
    let first = outcomes.first().ok_or(Error::Empty("outcome list"))?.task_type;
    if outcomes.iter().any(|o| o.task_type != first) {
        return Err(Error::InvalidArgument("outcomes mix task types; pass --metric".into()).into());
    }
    Ok(Metric::for_task(first))
}

#[derive(Debug, Deserialize)]
struct TextRecord {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    text: Option<String>,
}

/// `(id, text)` of every record; each record must carry text.
fn read_texts(path: &Path) -> CliResult<Vec<(Result<String, Error>, String)>> {
    let records: Vec<(usize, TextRecord)> = datastore::read_jsonl(path)?;
    records
        .into_iter()
        .map(|(line, r)| {
            let text = r.text.ok_or_else(|| Error::Malformed {
                line,
                message: "missing text".into(),
            })?;
            let id = r.id.ok_or_else(|| Error::Malformed {
                line,
                message: "missing id".into(),
            });
            Ok((id, text))
        })
        .collect()
}
