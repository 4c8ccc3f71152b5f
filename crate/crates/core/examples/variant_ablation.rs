// Routing accuracy at a scarce budget for every score variant and for a
// few clusters-per-class settings, on overlapping blobs where the
// choices matter.

use std::error::Error;

use thrust_gate::evaluation::{simulate_policy, Metric};
use thrust_gate::gating::route_budgeted;
use thrust_gate::synthetic::{gaussian_task, TaskSpec};
use thrust_gate::{build_cluster_model, Budget, Direction, ScoreVariant, ThrustModel};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let task = gaussian_task(&TaskSpec {
        dim: 4,
        center_radius: 2.0,
        spread: 1.5,
        outlier_box: 6.0,
        ..TaskSpec::default()
    })?;
    let test = task.test_set();
    let budget = Budget::SCARCE;

    let accuracy = |variant: ScoreVariant, k: Option<usize>| -> Result<f64, Box<dyn Error>> {
        let model = ThrustModel::new(build_cluster_model(&task.samples, k, 13)?, variant)?;
        let decisions = route_budgeted(&model.score_batch(&test)?, budget, Direction::LowFirst);
        Ok(simulate_policy(variant.name(), budget.fraction(), &task.outcomes, &decisions, Metric::Accuracy)?.value)
    };

    for variant in ScoreVariant::ALL {
        println!("{:<24} {:.3}", variant.name(), accuracy(variant, None)?);
    }
    for k in [1, 3, 10] {
        println!("{:<24} {:.3}", format!("full, k = {k}"), accuracy(ScoreVariant::Full, Some(k))?);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run_example()
}
