//! Each node sketches its own block; the coordinator stacks the payloads.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::{distributed_sketch, NodeScheme, ProjectionKind};
use hydrosketch::leverage::Partition;
use hydrosketch::linalg::thin_orthonormalize;
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(1);
    let a =
        GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, 4096, 20).generate(rng.child(0))?;
    let partition = Partition::new(a.rows(), 8)?;
    let scheme = NodeScheme::Projected(ProjectionKind::RandomUnitary);
    let global = distributed_sketch(&a, partition, 128, scheme, rng.child(1))?;
    println!("nodes {:?} sent {:?} rows", global.nodes, global.local_rows);

    // Singular values of the sketched basis stay close to one.
    let u = thin_orthonormalize(&a)?.into_matrix();
    let sketched_u = distributed_sketch(&u, partition, 128, scheme, rng.child(1))?.sketch;
    let eigen = hydrosketch::linalg::symmetric_eigenvalues(&sketched_u.gram())?;
    println!(
        "eigenvalues of (SU)^T SU in [{:.3}, {:.3}]",
        eigen.first().unwrap(),
        eigen.last().unwrap()
    );
    Ok(())
}
