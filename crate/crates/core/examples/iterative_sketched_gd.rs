//! Distributed gradient descent with a fresh row sample at every iteration.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::ProjectionKind;
use hydrosketch::regression::{iterative_sketched_gd, GdConfig};
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(12);
    let spec = GeneratorSpec::new(
        GeneratorKind::GaussianNoiseRegression { sigma: 0.1 },
        4096,
        20,
    );
    let problem = spec.generate_regression(rng.child(0))?.into_problem(8)?;
    let cfg = GdConfig::new(500, 64, ProjectionKind::RandomUnitary);
    let state = iterative_sketched_gd(&problem, &cfg, rng.child(1))?;
    for t in [0, 10, 50, 250, 500] {
        println!(
            "t = {t:3}: relative error {:.4e}",
            state.error_at(t).unwrap()
        );
    }
    Ok(())
}
