// Compare Thrust, BM25 and random routing against the hindsight oracle
// at the three standard budgets.

use std::error::Error;

use thrust_gate::bm25::{Bm25Index, Difficulty, DEFAULT_B, DEFAULT_K1};
use thrust_gate::evaluation::{compare_policies, oracle_route, simulate_policy, Metric, PolicyScores};
use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::{build_cluster_model, Budget, Direction, ScoreVariant, ThrustModel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let task = gaussian_task(&TaskSpec::default())?;
    let test = task.test_set();

    let model = ThrustModel::new(build_cluster_model(&task.samples, None, 13)?, ScoreVariant::Full)?;
    let thrust = model.score_batch(&test)?;

    let calibration = task.calibration_set();
    let corpus: Vec<&str> = calibration.samples().iter().filter_map(|s| s.text.as_deref()).collect();
    let index = Bm25Index::build(&corpus, DEFAULT_K1, DEFAULT_B)?;
    let queries: Vec<(&str, &str)> = test
        .samples()
        .iter()
        .map(|s| (s.id.as_str(), s.text.as_deref().unwrap_or("")))
        .collect();
    let bm25 = index.score_queries(&queries);

    let budgets = [Budget::SCARCE, Budget::MEDIUM, Budget::ABUNDANT];
    let policies = [
        PolicyScores::new("thrust", thrust, Direction::LowFirst),
        PolicyScores::new("bm25", bm25, Difficulty::LowRelevance.direction()),
    ];
    let mut reports = compare_policies(&task.outcomes, &policies, &budgets, Metric::Accuracy, 13)?;
    for &budget in &budgets {
        let decisions = oracle_route(&task.outcomes, budget, Metric::Accuracy)?;
        reports.push(simulate_policy("oracle", budget.fraction(), &task.outcomes, &decisions, Metric::Accuracy)?);
    }

    println!("{:<8} {:>7} {:>9}", "policy", "budget", "accuracy");
    for r in &reports {
        println!("{:<8} {:>7.2} {:>9.3}", r.policy, r.budget_fraction, r.value);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
