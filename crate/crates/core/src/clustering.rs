//! Per-class k-means over calibration embeddings.

use std::collections::HashSet;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datastore::{self, SampleSet, Split};
use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 300;
pub const RELATIVE_TOLERANCE: f64 = 1e-6;

/// Clusters per class for a calibration set of `n_samples`: the smallest
/// integer not below the fourth root of `n_samples`, and never less than 3.
pub fn choose_k(n_samples: usize) -> usize {
    // integer ceil of the fourth root avoids powf rounding at perfect powers
    let mut root = 1usize;
    while root.saturating_pow(4) < n_samples {
        root += 1;
    }
    root.max(3)
}

/// Result of one k-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignments: Vec<usize>,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub inertias: Vec<f64>,
    /// Total inertia after each Lloyd iteration.
    pub inertia_history: Vec<f64>,
}

impl KMeansFit {
    pub fn total_inertia(&self) -> f64 {
        self.inertias.iter().sum()
    }
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn distinct_count(points: &[Vec<f64>]) -> usize {
    points
        .iter()
        .map(|p| p.iter().map(|v| v.to_bits()).collect::<Vec<_>>())
        .collect::<HashSet<_>>()
        .len()
}

/// k-means++ seeding followed by Lloyd iterations.
///
/// The effective number of clusters is `min(k, distinct points)`. Iteration
/// stops once assignments are stable, the relative inertia improvement drops
/// below [`RELATIVE_TOLERANCE`], or after [`MAX_ITERATIONS`]. A cluster left
/// empty by reassignment takes over the point farthest from its centroid.
pub fn fit_kmeans(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansFit> {
    let first = points.first().ok_or(Error::Empty("point list"))?;
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    let dim = first.len();
    if let Some(bad) = points.iter().position(|p| p.len() != dim) {
        return Err(Error::DimensionMismatch {
            line: bad + 1,
            expected: dim,
            found: points[bad].len(),
        });
    }
    let k = k.min(distinct_count(points));
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = plus_plus_init(points, k, &mut rng);

    let n = points.len();
    let mut assignments = vec![usize::MAX; n];
    let mut history = Vec::new();
    let mut previous: Option<f64> = None;

    for _ in 0..MAX_ITERATIONS {
        let mut changed = false;
        for (slot, p) in assignments.iter_mut().zip(points) {
            let best = nearest(p, &centroids).0;
            if *slot != best {
                *slot = best;
                changed = true;
            }
        }
        repair_empty(points, &mut assignments, &centroids, k);
        centroids = means(points, &assignments, k, dim);

        let total: f64 = points
            .iter()
            .zip(&assignments)
            .map(|(p, &a)| sq_dist(p, &centroids[a]))
            .sum();
        if let Some(prev) = previous {
            debug_assert!(
                total <= prev + 1e-9 * prev.abs().max(1.0),
                "inertia increased: {prev} -> {total}"
            );
        }
        history.push(total);
        if !changed {
            break;
        }
        if let Some(prev) = previous {
            if prev <= 0.0 || (prev - total) / prev < RELATIVE_TOLERANCE {
                break;
            }
        }
        previous = Some(total);
    }

    let mut sizes = vec![0usize; k];
    let mut inertias = vec![0.0; k];
    for (p, &a) in points.iter().zip(&assignments) {
        sizes[a] += 1;
        inertias[a] += sq_dist(p, &centroids[a]);
    }
    Ok(KMeansFit {
        assignments,
        centroids,
        sizes,
        inertias,
        inertia_history: history,
    })
}

fn nearest(p: &[f64], centroids: &[Vec<f64>]) -> (usize, f64) {
    centroids
        .iter()
        .enumerate()
        .map(|(i, c)| (i, sq_dist(p, c)))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.random_range(0..points.len())].clone());
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        // k never exceeds the distinct count, so some point is still uncovered
        let mut target = rng.random::<f64>() * total;
        let mut chosen = None;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            chosen = Some(i);
            if target < w {
                break;
            }
            target -= w;
        }
        let next = points[chosen.expect("an uncovered point remains")].clone();
        for (slot, p) in d2.iter_mut().zip(points) {
            *slot = slot.min(sq_dist(p, &next));
        }
        centroids.push(next);
    }
    centroids
}

fn repair_empty(points: &[Vec<f64>], assignments: &mut [usize], centroids: &[Vec<f64>], k: usize) {
    let mut sizes = vec![0usize; k];
    for &a in assignments.iter() {
        sizes[a] += 1;
    }
    for empty in 0..k {
        if sizes[empty] > 0 {
            continue;
        }
        let donor = assignments
            .iter()
            .enumerate()
            .filter(|(_, &a)| sizes[a] > 1)
            .map(|(i, &a)| (i, sq_dist(&points[i], &centroids[a])))
            .fold(None, |best: Option<(usize, f64)>, cur| match best {
                Some(b) if b.1 >= cur.1 => Some(b),
                _ => Some(cur),
            });
        if let Some((i, _)) = donor {
            sizes[assignments[i]] -= 1;
            assignments[i] = empty;
            sizes[empty] = 1;
        }
    }
}

fn means(points: &[Vec<f64>], assignments: &[usize], k: usize, dim: usize) -> Vec<Vec<f64>> {
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (p, &a) in points.iter().zip(assignments) {
        counts[a] += 1;
        for (s, v) in sums[a].iter_mut().zip(p) {
            *s += v;
        }
    }
    for (sum, &c) in sums.iter_mut().zip(&counts) {
        let c = c.max(1) as f64;
        sum.iter_mut().for_each(|s| *s /= c);
    }
    sums
}

/// Centroids of one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassClusters {
    pub label: String,
    pub centroids: Vec<Vec<f64>>,
    pub sizes: Vec<usize>,
    pub inertias: Vec<f64>,
}

/// Frozen output of calibration: the clusters of every class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterModel {
    pub task_id: String,
    pub dim: usize,
    pub k_nominal: usize,
    pub seed: u64,
    pub classes: Vec<ClassClusters>,
}

impl ClusterModel {
    /// Checks the structural invariants; used after deserialization and by
    /// hand-built models.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidModel(m));
        if self.dim == 0 {
            return bad("dim must be positive".into());
        }
        if self.k_nominal == 0 {
            return bad("k_nominal must be positive".into());
        }
        if self.classes.is_empty() {
            return bad("no classes".into());
        }
        for class in &self.classes {
            let k = class.centroids.len();
            if k == 0 || class.sizes.len() != k || class.inertias.len() != k {
                return bad(format!("class {:?}: mismatched cluster lists", class.label));
            }
            if class.centroids.iter().any(|c| c.len() != self.dim) {
                return bad(format!("class {:?}: centroid dimension != {}", class.label, self.dim));
            }
            if class.centroids.iter().flatten().any(|v| !v.is_finite())
                || class.inertias.iter().any(|v| !v.is_finite() || *v < 0.0)
            {
                return bad(format!("class {:?}: non-finite values", class.label));
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn n_centroids(&self) -> usize {
        self.classes.iter().map(|c| c.centroids.len()).sum()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        datastore::write_json(path, self)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: Self = datastore::read_json(path)?;
        model.validate()?;
        Ok(model)
    }
}

/// Clusters the calibration split of `samples`, one k-means per label.
///
/// `k_override` replaces the [`choose_k`] value computed from the total
/// calibration count. Class `i` (in label-set order) is fitted with seed
/// `seed + i`.
pub fn build_cluster_model(
    samples: &SampleSet,
    k_override: Option<usize>,
    seed: u64,
) -> Result<ClusterModel> {
    if k_override == Some(0) {
        return Err(Error::InvalidArgument("k override must be positive".into()));
    }
    let labels = samples.label_set();
    let groups: Vec<Vec<Vec<f64>>> = labels
        .iter()
        .map(|label| {
            samples
                .iter_split(Split::Calibration)
                .filter(|s| s.class_label() == label)
                .map(|s| s.embedding.clone())
                .collect()
        })
        .collect();
    if let Some(i) = groups.iter().position(Vec::is_empty) {
        return Err(Error::EmptyClass {
            label: labels[i].clone(),
        });
    }
    let total: usize = groups.iter().map(Vec::len).sum();
    let k = k_override.unwrap_or_else(|| choose_k(total));

    let classes = groups
        .par_iter()
        .zip(labels.par_iter())
        .enumerate()
        .map(|(i, (points, label))| {
            let fit = fit_kmeans(points, k, seed.wrapping_add(i as u64))?;
            Ok(ClassClusters {
                label: label.clone(),
                centroids: fit.centroids,
                sizes: fit.sizes,
                inertias: fit.inertias,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(ClusterModel {
        task_id: samples.task_id().to_owned(),
        dim: samples.dim(),
        k_nominal: k,
        seed,
        classes,
    })
}
