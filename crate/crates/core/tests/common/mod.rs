//! Reference implementations kept independent of the library's code paths.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thrust_gate::{ClassClusters, ClusterModel};

/// One centroid term at a time: size / ‖d‖² scaling the unit vector d / ‖d‖,
/// summed, divided by N·K, then the norm. No distance floor.
pub fn naive_thrust(model: &ClusterModel, query: &[f64]) -> f64 {
    let n = model.classes.len() as f64;
    let k = model.k_nominal as f64;
    let mut total = vec![0.0; query.len()];
    for class in &model.classes {
        for (centroid, size) in class.centroids.iter().zip(&class.sizes) {
            let d: Vec<f64> = centroid.iter().zip(query).map(|(m, q)| m - q).collect();
            let len = d.iter().map(|x| x * x).sum::<f64>().sqrt();
            let unit: Vec<f64> = d.iter().map(|x| x / len).collect();
            let weight = *size as f64 / (len * len);
            for (t, u) in total.iter_mut().zip(&unit) {
                *t += weight * u;
            }
        }
    }
    total.iter().map(|t| (t / (n * k)).powi(2)).sum::<f64>().sqrt()
}

/// Scalar variant: Σ size / ‖d‖² / (N·K).
pub fn naive_scalar(model: &ClusterModel, query: &[f64]) -> f64 {
    let nk = (model.classes.len() * model.k_nominal) as f64;
    model
        .classes
        .iter()
        .flat_map(|c| c.centroids.iter().zip(&c.sizes))
        .map(|(m, &s)| {
            let d2: f64 = m.iter().zip(query).map(|(a, b)| (a - b) * (a - b)).sum();
            s as f64 / d2
        })
        .sum::<f64>()
        / nk
}

/// Minimal total within-cluster squared error over every 2-partition of
/// 1-D points, with the sorted cluster means.
pub fn best_two_partition(points: &[f64]) -> (f64, [f64; 2]) {
    let n = points.len();
    let mut best = (f64::INFINITY, [0.0, 0.0]);
    for mask in 1..(1u32 << n) - 1 {
        let (a, b): (Vec<f64>, Vec<f64>) = {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for (i, &p) in points.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    a.push(p)
                } else {
                    b.push(p)
                }
            }
            (a, b)
        };
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let sse = |v: &[f64]| {
            let m = mean(v);
            v.iter().map(|x| (x - m) * (x - m)).sum::<f64>()
        };
        let cost = sse(&a) + sse(&b);
        if cost < best.0 {
            let mut means = [mean(&a), mean(&b)];
            means.sort_by(f64::total_cmp);
            best = (cost, means);
        }
    }
    best
}

pub fn random_vec(rng: &mut impl Rng, dim: usize, scale: f64) -> Vec<f64> {
    (0..dim).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Random model with `n` classes of `k` centroids each.
pub fn random_model(rng: &mut impl Rng, dim: usize, n: usize, k: usize) -> ClusterModel {
    let classes = (0..n)
        .map(|l| ClassClusters {
            label: format!("l{l}"),
            centroids: (0..k).map(|_| random_vec(rng, dim, 5.0)).collect(),
            sizes: (0..k).map(|_| rng.random_range(1..50)).collect(),
            inertias: (0..k).map(|_| rng.random_range(0.0..10.0)).collect(),
        })
        .collect();
    ClusterModel {
        task_id: "random".into(),
        dim,
        k_nominal: k,
        seed: 0,
        classes,
    }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
