//! Fast Walsh–Hadamard transform and the SRHT embedding error on a heavy-tailed design.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::hadamard::fwht_rows;
use hydrosketch::regression::se_error;
use hydrosketch::sketch::{SketchKind, SketchOperator};
use hydrosketch::{Matrix, SeededRng};

fn main() -> hydrosketch::Result<()> {
    let e3 = Matrix::from_fn(8, 1, |i, _| (i == 3) as u8 as f64);
    println!("H_8 e_3 = {:?}", fwht_rows(&e3)?.column(0));

    let rng = SeededRng::new(7);
    let a =
        GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, 1000, 10).generate(rng.child(0))?;
    for rows in [100, 200, 400, 800] {
        let srht = SketchOperator::realize(
            SketchKind::Srht,
            a.rows(),
            rows,
            rng.child(rows as u64),
            None,
        )?;
        let gauss = SketchOperator::realize(
            SketchKind::Gaussian,
            a.rows(),
            rows,
            rng.child(rows as u64),
            None,
        )?;
        println!(
            "R = {rows:4}: srht {:.3}, gaussian {:.3}",
            se_error(&srht, &a)?,
            se_error(&gauss, &a)?
        );
    }
    Ok(())
}
