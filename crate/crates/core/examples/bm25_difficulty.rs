// Rank test queries by average BM25 relevance to the calibration texts.
//
// Outlier queries share no vocabulary with the corpus, so they land at
// the low-relevance end.

use std::error::Error;

use thrust_gate::bm25::{Bm25Index, Difficulty, DEFAULT_B, DEFAULT_K1};
use thrust_gate::gating::route_budgeted;
use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::Budget;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let task = gaussian_task(&TaskSpec::default())?;
    let calibration = task.calibration_set();
    let corpus: Vec<&str> = calibration.samples().iter().filter_map(|s| s.text.as_deref()).collect();
    let index = Bm25Index::build(&corpus, DEFAULT_K1, DEFAULT_B)?;
    println!("{} documents, avgdl {:.2}", index.n_docs(), index.avgdl());

    let test = task.test_set();
    let queries: Vec<(&str, &str)> = test
        .samples()
        .iter()
        .map(|s| (s.id.as_str(), s.text.as_deref().unwrap_or("")))
        .collect();
    let scores = index.score_queries(&queries);

    let budget = Budget::new(0.3)?;
    let decisions = route_budgeted(&scores, budget, Difficulty::LowRelevance.direction());
    let caught = decisions
        .iter()
        .filter(|d| d.retrieve && task.outlier_ids.contains(&d.id))
        .count();
    println!(
        "retrieving the {} least relevant queries catches {caught} of {} outliers",
        budget.floor_count(scores.len()),
        task.outlier_ids.len()
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
