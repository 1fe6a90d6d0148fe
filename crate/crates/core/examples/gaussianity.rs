//! Inner products of independent Rademacher vectors approach the normal law.

use hydrosketch::hybrid::gaussianity_report;
use hydrosketch::SeededRng;

fn main() -> hydrosketch::Result<()> {
    let rng = SeededRng::new(11);
    for nu in [1, 4, 16, 64, 256, 1024] {
        let report = gaussianity_report(nu, 10_000, rng.child(nu as u64))?;
        println!("nu = {nu:4}: sup |F - Phi| = {:.4}", report.statistic);
    }
    Ok(())
}
