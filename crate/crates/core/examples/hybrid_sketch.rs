//! Local SRHTs followed by a global Rademacher sketch, against local SRHT + global SRHT.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::NodeScheme;
use hydrosketch::hybrid::{HybridOperator, HybridPlan};
use hydrosketch::regression::se_error;
use hydrosketch::sketch::SketchKind;
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(8);
    let a =
        GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, 4096, 20).generate(rng.child(0))?;
    let local = NodeScheme::Sketch(SketchKind::Srht);
    for global in [SketchKind::Rademacher, SketchKind::Srht] {
        let plan = HybridPlan::from_ratios(a.rows(), a.cols(), 8, 0.8, 0.7, local, global)?;
        let errors = (0..5)
            .map(|t| se_error(&HybridOperator::realize(&plan, rng.child(t), Some(&a))?, &a))
            .collect::<hydrosketch::Result<Vec<_>>>()?;
        println!(
            "{local}+{global}: R = {}, R~ = {}, errors {:.3?}",
            plan.first_dim, plan.second_dim, errors
        );
    }
    Ok(())
}
