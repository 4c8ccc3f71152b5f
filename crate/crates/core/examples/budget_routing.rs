// Calibrate a threshold on calibration scores, then route test queries
// either by that threshold or by an exact budget.

use std::error::Error;

use thrust_gate::gating::{calibrate_threshold, random_route, route_budgeted, route_threshold};
use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::{build_cluster_model, Budget, Direction, RoutingDecision, ScoreVariant, ThrustModel};

fn count(decisions: &[RoutingDecision]) -> usize {
    decisions.iter().filter(|d| d.retrieve).count()
}

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let task = gaussian_task(&TaskSpec::default())?;
    let model = ThrustModel::new(build_cluster_model(&task.samples, None, 13)?, ScoreVariant::Full)?;
    let calibration = model.score_batch(&task.calibration_set())?;
    let test = model.score_batch(&task.test_set())?;
    let ids: Vec<&str> = test.iter().map(|s| s.id.as_str()).collect();

    for budget in [Budget::SCARCE, Budget::MEDIUM, Budget::ABUNDANT] {
        let threshold = calibrate_threshold(&calibration, budget)?;
        let by_threshold = route_threshold(&test, &threshold);
        let budgeted = route_budgeted(&test, budget, Direction::LowFirst);
        let random = random_route(&ids, budget, 13);
        let caught = budgeted
            .iter()
            .filter(|d| d.retrieve && task.outlier_ids.contains(&d.id))
            .count();
        println!(
            "budget {budget}: lambda {:.5}, threshold routes {}, budgeted routes {} ({} outliers), random routes {}",
            threshold.lambda,
            count(&by_threshold),
            count(&budgeted),
            caught,
            count(&random),
        );
        assert_eq!(count(&budgeted), budget.floor_count(test.len()));
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
