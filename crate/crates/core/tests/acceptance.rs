//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use rand::Rng;
use thrust_gate::bm25::{self, Bm25Index};
use thrust_gate::clustering::{build_cluster_model, choose_k, fit_kmeans};
use thrust_gate::evaluation::{accuracy, qa_f1, simulate_policy, Metric};
use thrust_gate::gating::{calibrate_threshold, random_route, route_budgeted, route_threshold};
use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::{
    Budget, ClassClusters, ClusterModel, Direction, EmbeddedSample, QueryScore, SampleSet, ScoreVariant, Split,
    ThrustModel,
};

use common::{best_two_partition, naive_thrust, random_model, random_vec, rng};

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Result<(), String> {
    if elapsed <= limit {
        Ok(())
    } else {
        Err(format!("took {elapsed:?}, limit {limit:?}"))
    }
}

fn thrust(model: ClusterModel, variant: ScoreVariant) -> ThrustModel {
    ThrustModel::new(model, variant).expect("valid model")
}

fn score_oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst: f64 = 0.0;
    for i in 0..1000 {
        let dim = r.random_range(1..=64);
        let n = r.random_range(1..=4);
        let k = r.random_range(1..=5);
        let clusters = random_model(&mut r, dim, n, k);
        let query = random_vec(&mut r, dim, 6.0);
        let expected = naive_thrust(&clusters, &query);
        let got = thrust(clusters, ScoreVariant::Full).score(&query).unwrap();
        let rel = (got - expected).abs() / expected.abs().max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        ensure!(rel <= 1e-9, "instance {i}: got {got}, oracle {expected}, rel {rel:e}");
    }
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("1000 instances, worst rel err {worst:.2e}, {:?}", start.elapsed()))
}

fn symmetry_cancellation() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2);
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let dim = r.random_range(1..=32);
        let n = r.random_range(1..=4);
        let k = 2 * r.random_range(1..=2);
        let query = random_vec(&mut r, dim, 3.0);
        let classes = (0..n)
            .map(|l| {
                let mut centroids = Vec::new();
                let mut sizes = Vec::new();
                for _ in 0..k / 2 {
                    let v = random_vec(&mut r, dim, 2.0);
                    let size = r.random_range(1..40);
                    centroids.push(query.iter().zip(&v).map(|(q, x)| q + x).collect());
                    centroids.push(query.iter().zip(&v).map(|(q, x)| q - x).collect());
                    sizes.extend([size, size]);
                }
                ClassClusters {
                    label: format!("l{l}"),
                    inertias: vec![1.0; centroids.len()],
                    centroids,
                    sizes,
                }
            })
            .collect();
        let model = ClusterModel {
            task_id: "sym".into(),
            dim,
            k_nominal: k,
            seed: 0,
            classes,
        };
        let s = thrust(model, ScoreVariant::Full).score(&query).unwrap();
        worst = worst.max(s);
        ensure!(s < 1e-12, "config {i}: score {s:e}");
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("100 configs, max score {worst:.2e}"))
}

fn far_field_decay() -> Outcome {
    let start = Instant::now();
    let mut r = rng(3);
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..50 {
        let dim = r.random_range(1..=16);
        let (n, k) = (r.random_range(1..=4), r.random_range(1..=5));
        let clusters = random_model(&mut r, dim, n, k);
        let spread = clusters
            .classes
            .iter()
            .flat_map(|c| &c.centroids)
            .flat_map(|a| clusters.classes.iter().flat_map(|c| &c.centroids).map(move |b| (a, b)))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
            .max(1.0);
        let mut u = random_vec(&mut r, dim, 1.0);
        let len = u.iter().map(|x| x * x).sum::<f64>().sqrt();
        u.iter_mut().for_each(|x| *x /= len);
        let model = thrust(clusters, ScoreVariant::Full);
        for mult in [1e4, 1e5, 1e6] {
            let t = mult * spread;
            let at = |t: f64| model.score(&u.iter().map(|x| x * t).collect::<Vec<_>>()).unwrap();
            let ratio = at(t) / at(2.0 * t);
            lo = lo.min(ratio);
            hi = hi.max(ratio);
            ensure!((3.8..=4.2).contains(&ratio), "config {i}, t={t:e}: ratio {ratio}");
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("50 configs, s(t)/s(2t) in [{lo:.4}, {hi:.4}]"))
}

fn k_formula() -> Outcome {
    let got: Vec<usize> = [1, 5, 81, 200, 10_000].into_iter().map(choose_k).collect();
    ensure!(got == [3, 3, 3, 4, 10], "got {got:?}");
    Ok(format!("{got:?}"))
}

fn kmeans_properties() -> Outcome {
    let start = Instant::now();
    let mut r = rng(4);
    for i in 0..100 {
        let dim = r.random_range(1..=8);
        let n = r.random_range(1..=80);
        let points: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut r, dim, 10.0)).collect();
        let k = r.random_range(1..=8);
        let fit = fit_kmeans(&points, k, i).unwrap();
        for w in fit.inertia_history.windows(2) {
            ensure!(w[1] <= w[0] * (1.0 + 1e-12), "instance {i}: inertia rose {} -> {}", w[0], w[1]);
        }
        ensure!(fit.sizes.iter().sum::<usize>() == n, "instance {i}: sizes do not sum to {n}");
    }
    let points: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&x| vec![x]).collect();
    let (best_cost, best_means) = best_two_partition(&[0.0, 1.0, 10.0, 11.0]);
    for seed in 0..10 {
        let fit = fit_kmeans(&points, 2, seed).unwrap();
        let mut means: Vec<f64> = fit.centroids.iter().map(|c| c[0]).collect();
        means.sort_by(f64::total_cmp);
        ensure!(
            means == best_means && (fit.total_inertia() - best_cost).abs() < 1e-12,
            "seed {seed}: {means:?} vs exhaustive {best_means:?}"
        );
    }
    within(start.elapsed(), Duration::from_secs(5))?;
    Ok(format!("100 monotone runs; 10/10 seeds reach {best_means:?}"))
}

fn qa_metrics() -> Outcome {
    let g = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    ensure!(qa_f1("fall in love", &g(&["fall in love"])).unwrap() == 1.0, "exact match");
    ensure!(qa_f1("paris", &g(&["london"])).unwrap() == 0.0, "disjoint");
    // per-gold F1 {1.0, 2/3}: the article is stripped, so the first gold matches exactly
    ensure!(qa_f1("the blue whale", &g(&["blue whale", "whale"])).unwrap() == 1.0, "blue whale");
    ensure!(accuracy("Yes", &g(&["yes"])).unwrap() == 1.0, "case");
    ensure!(accuracy("no", &g(&["yes"])).unwrap() == 0.0, "mismatch");
    ensure!(accuracy("the yes", &g(&["yes"])).unwrap() == 1.0, "article");

    let mut r = rng(5);
    let vocab = ["a", "the", "cat", "dog", "blue", "whale", "paris", "yes", "no", "!", "Cat,"];
    let phrase = |r: &mut rand_chacha::ChaCha8Rng| {
        (0..r.random_range(0..6))
            .map(|_| vocab[r.random_range(0..vocab.len())])
            .collect::<Vec<_>>()
            .join(" ")
    };
    for i in 0..1000 {
        let pred = phrase(&mut r);
        let gold: Vec<String> = (0..r.random_range(1..4)).map(|_| phrase(&mut r)).collect();
        let f = qa_f1(&pred, &gold).unwrap();
        let a = accuracy(&pred, &gold).unwrap();
        ensure!((0.0..=1.0).contains(&f) && (0.0..=1.0).contains(&a), "case {i}: {f} {a}");
        ensure!(qa_f1(&gold[0], &gold).unwrap() == 1.0, "case {i}: exact gold not 1.0");
        ensure!(accuracy(&gold[0], &gold).unwrap() == 1.0, "case {i}: exact gold accuracy");
    }
    Ok("6 hand examples; 1000 random in [0,1]; exact matches score 1".into())
}

fn bm25_checks() -> Outcome {
    let idx = bm25::build_index(&["cat"], 1.2, 0.75).unwrap();
    let single = bm25::bm25_score(&idx, "cat", 0).unwrap();
    ensure!((single - 0.287_682_072_451_780_85).abs() < 1e-6, "single-doc {single}");

    let mut r = rng(6);
    for c in 0..100 {
        let n_docs = r.random_range(1..20);
        let corpus: Vec<String> = (0..n_docs)
            .map(|_| {
                (0..r.random_range(1..15))
                    .map(|_| format!("t{}", r.random_range(0..12)))
                    .collect::<Vec<_>>()
                    .join(" ")
            })
            .collect();
        let index = Bm25Index::build(&corpus, 1.2, 0.75).unwrap();
        // saturation: fixed idf and doc length, tf = 1..20
        let idf = bm25::idf(index.n_docs(), r.random_range(1..=index.n_docs()));
        let dl = index.doc_lengths()[0] as f64;
        let parts: Vec<f64> = (1..=20)
            .map(|tf| idf * bm25::tf_component(tf as f64, dl, index.avgdl(), 1.2, 0.75))
            .collect();
        ensure!(parts.windows(2).all(|w| w[1] >= w[0]), "corpus {c}: not monotone in tf");
        ensure!(
            parts.windows(3).all(|w| w[1] - w[0] >= w[2] - w[1] - 1e-12),
            "corpus {c}: not concave in tf"
        );
        // rarity: equal tf in the same doc, smaller df never contributes less
        for (d, _) in index.doc_lengths().iter().enumerate() {
            let terms: Vec<String> = (0..12).map(|t| format!("t{t}")).filter(|t| index.tf(d, t) > 0).collect();
            for a in &terms {
                for b in &terms {
                    if index.tf(d, a) == index.tf(d, b) && index.df(a) < index.df(b) {
                        let (sa, sb) = (index.score(a, d).unwrap(), index.score(b, d).unwrap());
                        ensure!(sa >= sb, "corpus {c} doc {d}: {a}={sa} < {b}={sb}");
                    }
                }
            }
            ensure!(index.score(&corpus[d], d).unwrap() >= 0.0, "negative score");
        }
    }
    Ok(format!("ln(4/3) case = {single:.8}; saturation/rarity on 100 corpora"))
}

fn routing_exactness() -> Outcome {
    let mut r = rng(7);
    let fractions = [0.0, 0.25, 0.5, 0.75, 1.0];
    for n in 0..=200usize {
        let scores: Vec<QueryScore> = (0..n).map(|i| QueryScore::new(format!("q{i}"), r.random::<f64>())).collect();
        for &f in &fractions {
            let budget = Budget::new(f).unwrap();
            let floor = (f * n as f64).floor() as usize;
            for dir in [Direction::LowFirst, Direction::HighFirst] {
                let picked = route_budgeted(&scores, budget, dir).iter().filter(|d| d.retrieve).count();
                ensure!(picked == floor, "n={n} f={f}: budgeted picked {picked}, want {floor}");
            }
            if n > 0 {
                let ceil = (f * n as f64).ceil() as usize;
                let t = calibrate_threshold(&scores, budget).unwrap();
                let picked = route_threshold(&scores, &t).iter().filter(|d| d.retrieve).count();
                ensure!(picked == ceil, "n={n} f={f}: threshold routed {picked}, want {ceil}");
            }
        }
    }
    Ok("n in [0,200] x 5 fractions exact".into())
}

fn synthetic_end_to_end() -> Outcome {
    let start = Instant::now();
    let budget = Budget::SCARCE;
    let mut gaps = Vec::with_capacity(100);
    let mut losses = 0;
    for seed in 0..100u64 {
        let task = gaussian_task(&TaskSpec {
            seed,
            ..TaskSpec::default()
        })
        .unwrap();
        let model = build_cluster_model(&task.samples, None, seed).unwrap();
        let model = thrust(model, ScoreVariant::Full);
        let scores = model.score_batch(&task.test_set()).unwrap();
        let thrust_acc = simulate_policy(
            "thrust",
            0.25,
            &task.outcomes,
            &route_budgeted(&scores, budget, Direction::LowFirst),
            Metric::Accuracy,
        )
        .unwrap()
        .value;
        let ids: Vec<&str> = scores.iter().map(|s| s.id.as_str()).collect();
        let random_acc = simulate_policy(
            "default",
            0.25,
            &task.outcomes,
            &random_route(&ids, budget, seed),
            Metric::Accuracy,
        )
        .unwrap()
        .value;
        if thrust_acc < random_acc {
            losses += 1;
        }
        gaps.push(thrust_acc - random_acc);
    }
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len() as f64 * 100.0;
    ensure!(mean_gap >= 10.0, "mean gain {mean_gap:.2} points < 10");
    ensure!(losses <= 5, "thrust below random on {losses} seeds");
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("mean gain {mean_gap:.2} points, {losses} losing seeds, {:?}", start.elapsed()))
}

fn latency() -> Outcome {
    let mut r = rng(8);
    let clusters = random_model(&mut r, 1024, 5, 10);
    let model = thrust(clusters, ScoreVariant::Full);
    let queries: Vec<Vec<f64>> = (0..500).map(|_| random_vec(&mut r, 1024, 5.0)).collect();
    let mut sink = 0.0;
    for q in queries.iter().take(20) {
        sink += model.score(q).unwrap();
    }
    let start = Instant::now();
    for q in &queries {
        sink += model.score(q).unwrap();
    }
    let per_query = start.elapsed().as_secs_f64() / queries.len() as f64 * 1e3;
    std::hint::black_box(sink);
    ensure!(per_query <= 2.0, "{per_query:.4} ms per query");
    Ok(format!("{per_query:.4} ms per query (dim 1024, 50 centroids)"))
}

fn variant_sanity() -> Outcome {
    let mut r = rng(9);
    for i in 0..1000 {
        let dim = r.random_range(1..=32);
        let (n, k) = (r.random_range(1..=4), r.random_range(1..=5));
        let clusters = random_model(&mut r, dim, n, k);
        let q = random_vec(&mut r, dim, 6.0);
        let full = thrust(clusters.clone(), ScoreVariant::Full).score(&q).unwrap();
        let scalar = thrust(clusters, ScoreVariant::WithoutDirection).score(&q).unwrap();
        ensure!(scalar >= full * (1.0 - 1e-12), "instance {i}: scalar {scalar} < full {full}");
    }
    let sizes = [3usize, 7, 10, 25];
    let samples: Vec<EmbeddedSample> = sizes
        .iter()
        .enumerate()
        .flat_map(|(l, &n)| (0..n).map(move |i| (l, i)))
        .map(|(l, i)| EmbeddedSample {
            id: format!("{l}-{i}"),
            text: None,
            label: Some(format!("c{l}")),
            split: Split::Calibration,
            embedding: random_vec(&mut r, 4, 3.0),
        })
        .collect();
    let set = SampleSet::new("v", samples).unwrap();
    for k in [1usize, 10] {
        let model = build_cluster_model(&set, Some(k), 13).unwrap();
        for (class, &n) in model.classes.iter().zip(&sizes) {
            ensure!(
                class.centroids.len() == k.min(n),
                "k={k}: class {} has {} centroids, want {}",
                class.label,
                class.centroids.len(),
                k.min(n)
            );
        }
    }
    Ok("without_direction >= full on 1000; k override 1/10 cardinalities".into())
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("score oracle equivalence", score_oracle_equivalence),
        ("symmetry cancellation", symmetry_cancellation),
        ("far-field decay", far_field_decay),
        ("K formula", k_formula),
        ("k-means", kmeans_properties),
        ("QA-F1 and accuracy", qa_metrics),
        ("BM25", bm25_checks),
        ("routing exactness", routing_exactness),
        ("synthetic end-to-end", synthetic_end_to_end),
        ("latency", latency),
        ("variant sanity", variant_sanity),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name:<24} {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name:<24} {why}");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
