// Score histograms for a well-separated task and a heavily overlapping one.
//
// Tight, distant blobs give a spread-out distribution with a clear
// low-score tail. When the blobs collapse onto each other the pulls from
// different classes cancel and the scores bunch together.

use std::error::Error;

use thrust_gate::evaluation::score_histogram;
use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::{build_cluster_model, ScoreVariant, ThrustModel};

fn histogram(label: &str, spec: TaskSpec) -> Result<(), Box<dyn Error>> {
    let task = gaussian_task(&spec)?;
    let model = ThrustModel::new(build_cluster_model(&task.samples, None, spec.seed)?, ScoreVariant::Full)?;
    let scores = model.score_batch(&task.test_set())?;
    let hist = score_histogram(&scores, 10)?;
    println!("{label}");
    let widest = *hist.counts.iter().max().unwrap_or(&1);
    for (i, &c) in hist.counts.iter().enumerate() {
        let bar = "#".repeat(c * 40 / widest.max(1));
        println!("  [{:>9.5}, {:>9.5}) {:>4} {bar}", hist.bin_edges[i], hist.bin_edges[i + 1], c);
    }
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    histogram(
        "well clustered",
        TaskSpec {
            center_radius: 6.0,
            spread: 0.5,
            ..TaskSpec::default()
        },
    )?;
    histogram(
        "poorly clustered",
        TaskSpec {
            center_radius: 0.5,
            spread: 3.0,
            ..TaskSpec::default()
        },
    )
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
