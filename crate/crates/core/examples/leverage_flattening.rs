//! Local random unitaries flatten the leverage scores of each block.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::{Projection, ProjectionKind};
use hydrosketch::leverage::{flattening_report, leverage_profile, Partition};
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(2);
    let a =
        GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, 2000, 40).generate(rng.child(0))?;
    for k in [2, 5, 10] {
        let partition = Partition::new(a.rows(), k)?;
        let profile = leverage_profile(&a, partition)?;
        let projections = (0..k)
            .map(|i| {
                Projection::realize(
                    ProjectionKind::RandomUnitary,
                    partition.block_rows(),
                    rng.descend(&[k as u64, i as u64]),
                )
            })
            .collect::<hydrosketch::Result<Vec<_>>>()?;
        let report = flattening_report(&a, partition, &projections, 0.05)?;
        println!(
            "k = {k:2}: beta_hat {:.3}, coherence {:.4} -> {:.4}, within zeta {:.3}, max deviation {:.2e}",
            profile.beta_hat(),
            report.pre_coherence,
            report.post_coherence,
            report.fraction_within,
            report.max_deviation()
        );
    }
    Ok(())
}
