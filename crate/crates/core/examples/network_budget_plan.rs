//! Plans from network budgets and from an accuracy target.

use hydrosketch::distributed::NodeScheme;
use hydrosketch::hybrid::{plan_for_accuracy, plan_from_budget, DimensionFormula, NetworkBudget};
use hydrosketch::sketch::SketchKind;

fn main() -> hydrosketch::Result<()> {
    let budget = NetworkBudget::new(5000, 20_000, 8000)?;
    let plan = plan_from_budget(4000, 10, 4, budget)?;
    plan.write_key_values(std::io::stdout())?;

    println!();
    let plan = plan_for_accuracy(
        2048,
        20,
        8,
        0.5,
        0.2,
        NodeScheme::Sketch(SketchKind::Srht),
        SketchKind::Rademacher,
        DimensionFormula::SparseSrht,
    )?;
    plan.write_key_values(std::io::stdout())?;
    Ok(())
}
