//! FedAvg with iterative local sketching against a static sample and naive uniform sampling.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::ProjectionKind;
use hydrosketch::regression::{fedavg_sketched, GdConfig};
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(5);
    let spec = GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, 4000, 30);
    let problem = spec.generate_regression(rng.child(0))?.into_problem(8)?;
    let r = 425; // 0.85 of each 500-row block
    let variants = [
        ("iterative", ProjectionKind::HadamardSigned, true),
        ("static", ProjectionKind::HadamardSigned, false),
        ("naive", ProjectionKind::Identity, true),
    ];
    for (name, projection, refresh) in variants {
        let mut cfg = GdConfig::new(100, r, projection);
        cfg.refresh = refresh;
        let state = fedavg_sketched(&problem, &cfg, 2, rng.child(1))?;
        println!(
            "{name:9}: relative error after 100 rounds {:.4e}",
            state.final_error()
        );
    }
    Ok(())
}
