//! Synthetic gating tasks for demos and tests.
//!
//! Each class is an isotropic Gaussian blob. Calibration samples come only
//! from the blobs. Test queries are a mix of blob samples, which the
//! simulated model answers correctly without help, and uniform outliers,
//! which it answers correctly only with external knowledge. Every sample
//! also carries a bag-of-words text: blob samples draw from a small
//! per-class vocabulary, outliers from a large shared one.

use std::collections::HashSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::datastore::{EmbeddedSample, OutcomeRecord, SampleSet, Split, TaskType};
use crate::error::Result;

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub task_id: String,
    pub n_classes: usize,
    pub dim: usize,
    pub calibration_per_class: usize,
    pub n_test: usize,
    pub outlier_fraction: f64,
    /// Distance of each class center from the origin.
    pub center_radius: f64,
    /// Standard deviation of each blob along every axis.
    pub spread: f64,
    /// Outliers are uniform in `[-outlier_box, outlier_box]^dim`.
    pub outlier_box: f64,
    pub seed: u64,
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self {
            task_id: "synthetic".into(),
            n_classes: 2,
            dim: 16,
            calibration_per_class: 100,
            n_test: 200,
            outlier_fraction: 0.3,
            center_radius: 4.0,
            spread: 1.0,
            outlier_box: 12.0,
            seed: 13,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SyntheticTask {
    pub samples: SampleSet,
    pub outcomes: Vec<OutcomeRecord>,
    pub outlier_ids: HashSet<String>,
}

impl SyntheticTask {
    pub fn test_set(&self) -> SampleSet {
        self.samples.only(Split::Test).expect("synthetic tasks have test samples")
    }

    pub fn calibration_set(&self) -> SampleSet {
        self.samples
            .only(Split::Calibration)
            .expect("synthetic tasks have calibration samples")
    }
}

const CLASS_VOCAB: usize = 12;
const OUTLIER_VOCAB: usize = 5000;
const WORDS_PER_TEXT: usize = 6;

fn class_center(class: usize, dim: usize, radius: f64) -> Vec<f64> {
    let mut c = vec![0.0; dim];
    let axis = class / 2 % dim;
    c[axis] = if class.is_multiple_of(2) { radius } else { -radius };
    c
}

fn label(class: usize) -> String {
    format!("class{class}")
}

pub fn gaussian_task(spec: &TaskSpec) -> Result<SyntheticTask> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.spread).expect("spread is finite and non-negative");
    let centers: Vec<Vec<f64>> = (0..spec.n_classes)
        .map(|c| class_center(c, spec.dim, spec.center_radius))
        .collect();

    let blob_point = |class: usize, rng: &mut ChaCha8Rng| -> Vec<f64> {
        centers[class].iter().map(|m| m + noise.sample(rng)).collect()
    };
    let class_text = |class: usize, rng: &mut ChaCha8Rng| -> String {
        (0..WORDS_PER_TEXT)
            .map(|_| format!("c{class}w{}", rng.random_range(0..CLASS_VOCAB)))
            .collect::<Vec<_>>()
            .join(" ")
    };

    let mut samples = Vec::new();
    for class in 0..spec.n_classes {
        for i in 0..spec.calibration_per_class {
            samples.push(EmbeddedSample {
                id: format!("cal-{class}-{i}"),
                text: Some(class_text(class, &mut rng)),
                label: Some(label(class)),
                split: Split::Calibration,
                embedding: blob_point(class, &mut rng),
            });
        }
    }

    let n_outliers = (spec.outlier_fraction * spec.n_test as f64).round() as usize;
    let mut is_outlier: Vec<bool> = (0..spec.n_test).map(|i| i < n_outliers).collect();
    is_outlier.shuffle(&mut rng);

    let mut outcomes = Vec::with_capacity(spec.n_test);
    let mut outlier_ids = HashSet::new();
    for (i, &outlier) in is_outlier.iter().enumerate() {
        let id = format!("test-{i}");
        let class = rng.random_range(0..spec.n_classes);
        let gold = label(class);
        let (embedding, text, pred_without) = if outlier {
            outlier_ids.insert(id.clone());
            let e = (0..spec.dim)
                .map(|_| rng.random_range(-spec.outlier_box..=spec.outlier_box))
                .collect();
            let t = (0..WORDS_PER_TEXT)
                .map(|_| format!("rare{}", rng.random_range(0..OUTLIER_VOCAB)))
                .collect::<Vec<_>>()
                .join(" ");
            (e, t, "unknown".to_owned())
        } else {
            (blob_point(class, &mut rng), class_text(class, &mut rng), gold.clone())
        };
        samples.push(EmbeddedSample {
            id: id.clone(),
            text: Some(text),
            label: Some(gold.clone()),
            split: Split::Test,
            embedding,
        });
        outcomes.push(OutcomeRecord {
            id,
            gold_answers: vec![gold.clone()],
            pred_without,
            pred_with: gold,
            task_type: TaskType::Classification,
        });
    }

    Ok(SyntheticTask {
        samples: SampleSet::new(spec.task_id.clone(), samples)?,
        outcomes,
        outlier_ids,
    })
}
