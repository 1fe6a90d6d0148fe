//! Sketch-and-solve least squares with a hybrid sketch.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::NodeScheme;
use hydrosketch::hybrid::{HybridOperator, HybridPlan};
use hydrosketch::regression::{solve_exact, solve_sketched};
use hydrosketch::sketch::SketchKind;
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(3);
    let spec = GeneratorSpec::new(
        GeneratorKind::GaussianNoiseRegression { sigma: 0.1 },
        4096,
        20,
    );
    let problem = spec.generate_regression(rng.child(0))?.into_problem(8)?;
    let exact = solve_exact(&problem)?;
    let plan = HybridPlan::from_ratios(
        4096,
        20,
        8,
        0.8,
        0.7,
        NodeScheme::Sketch(SketchKind::Srht),
        SketchKind::Rademacher,
    )?;
    let op = HybridOperator::realize(&plan, rng.child(1), Some(problem.a()))?;
    let sketched = solve_sketched(&problem, &op)?;
    println!("exact residual    {:.5}", exact.residual);
    println!(
        "sketched residual {:.5} (ratio {:.4})",
        sketched.residual,
        sketched.residual / exact.residual
    );
    Ok(())
}
