// Fit per-class centroids on a synthetic task and score its test queries.
//
// Queries drawn from the class blobs should score well above the outliers.

use std::error::Error;

use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::{build_cluster_model, ScoreVariant, ThrustModel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let task = gaussian_task(&TaskSpec::default())?;
    let clusters = build_cluster_model(&task.samples, None, 13)?;
    println!(
        "{} classes, k = {}, {} centroids",
        clusters.n_classes(),
        clusters.k_nominal,
        clusters.n_centroids()
    );

    let model = ThrustModel::new(clusters, ScoreVariant::Full)?;
    let scores = model.score_batch(&task.test_set())?;

    let (mut blob, mut outlier) = (Vec::new(), Vec::new());
    for s in &scores {
        if task.outlier_ids.contains(&s.id) {
            outlier.push(s.score);
        } else {
            blob.push(s.score);
        }
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    println!("mean score, blob queries:    {:.5}", mean(&blob));
    println!("mean score, outlier queries: {:.5}", mean(&outlier));
    assert!(mean(&blob) > mean(&outlier));
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
