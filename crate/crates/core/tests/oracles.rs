//! Library results checked against dense reference computations in nalgebra.

mod common;

use approx::assert_abs_diff_eq;
use common::{
    from_nalgebra, hat_diagonal, normal_equations, svd_norm, sylvester_hadamard, to_nalgebra,
};
use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::{
    materialize_global_operator, node_configs, DistributedOperator, DistributedPlan, NodeScheme,
    Projection, ProjectionKind, SamplingMode,
};
use hydrosketch::hadamard::{fwht_rows, hadamard_entry, pad_to_power_of_two};
use hydrosketch::hybrid::{composite_operator, hybrid_sketch, HybridPlan};
use hydrosketch::leverage::{leverage_profile, Partition};
use hydrosketch::linalg::{
    least_squares, spectral_norm, spectral_norm_robust, symmetric_eigenvalues, thin_qr, HaarUnitary,
};
use hydrosketch::regression::{se_error, solve_exact, RegressionProblem};
use hydrosketch::sketch::{LinearSketch, SketchKind, SketchOperator};
use hydrosketch::{Matrix, SeededRng};
use rand::Rng;
use rand_distr::StandardNormal;

fn gaussian(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut stream = SeededRng::new(seed).stream();
    Matrix::from_fn(rows, cols, |_, _| stream.sample(StandardNormal))
}

fn tdist(rows: usize, cols: usize, seed: u64) -> Matrix {
    GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, rows, cols)
        .generate(SeededRng::new(seed))
        .unwrap()
}

#[test]
fn fwht_matches_sylvester_product() {
    for n in [1usize, 2, 8, 64, 512] {
        let x = gaussian(n, 3, n as u64);
        let fast = to_nalgebra(&fwht_rows(&x).unwrap());
        let naive = sylvester_hadamard(n) * to_nalgebra(&x);
        assert!((fast - naive).amax() < 1e-10, "n = {n}");
    }
}

#[test]
fn hadamard_entries_match_sylvester() {
    let h = sylvester_hadamard(32);
    for i in 0..32 {
        for j in 0..32 {
            assert_eq!(hadamard_entry(i, j), h[(i, j)]);
        }
    }
}

#[test]
fn fwht_rejects_non_power_of_two_and_padding_fixes_it() {
    let x = gaussian(12, 2, 1);
    assert!(fwht_rows(&x).is_err());
    let (padded, original) = pad_to_power_of_two(&x);
    assert_eq!((padded.rows(), original), (16, 12));
    assert!(padded.row_range(12..16).data().iter().all(|v| *v == 0.0));
    assert!(fwht_rows(&padded).is_ok());
}

#[test]
fn leverage_matches_hat_matrix_diagonal() {
    for (rows, cols, blocks) in [(50, 3, 5), (200, 10, 4), (480, 20, 8)] {
        let a = tdist(rows, cols, rows as u64);
        let profile = leverage_profile(&a, Partition::new(rows, blocks).unwrap()).unwrap();
        for (s, o) in profile.scores().iter().zip(hat_diagonal(&a)) {
            assert_abs_diff_eq!(*s, o, epsilon = 1e-8);
        }
        let total: f64 = profile.block_sums().iter().sum();
        assert_abs_diff_eq!(total, cols as f64, epsilon = 1e-9);
        let coherence = profile.scores().iter().cloned().fold(0.0, f64::max);
        assert_eq!(profile.coherence(), coherence);
    }
}

#[test]
fn thin_qr_reconstructs_and_is_orthonormal() {
    let a = tdist(120, 7, 3);
    let (basis, r) = thin_qr(&a).unwrap();
    let q = to_nalgebra(basis.u());
    let qtq = q.transpose() * &q;
    assert!((qtq - nalgebra::DMatrix::identity(7, 7)).amax() < 1e-12);
    assert!((&q * to_nalgebra(&r) - to_nalgebra(&a)).amax() < 1e-10 * a.max_abs());
    for i in 0..7 {
        for j in 0..i {
            assert_eq!(r.get(i, j), 0.0);
        }
    }
}

#[test]
fn spectral_norms_match_largest_singular_value() {
    for (rows, cols, seed) in [(30, 30, 1), (200, 12, 2), (5, 40, 3)] {
        let m = gaussian(rows, cols, seed);
        let oracle = svd_norm(&m);
        assert_abs_diff_eq!(spectral_norm(&m).unwrap(), oracle, epsilon = 1e-8 * oracle);
        assert_abs_diff_eq!(spectral_norm_robust(&m), oracle, epsilon = 1e-8 * oracle);
    }
}

#[test]
fn symmetric_eigenvalues_match_nalgebra() {
    let g = gaussian(20, 8, 5);
    let sym = g.gram();
    let mut ours = symmetric_eigenvalues(&sym).unwrap();
    let mut oracle: Vec<f64> = to_nalgebra(&sym)
        .symmetric_eigenvalues()
        .iter()
        .copied()
        .collect();
    ours.sort_by(f64::total_cmp);
    oracle.sort_by(f64::total_cmp);
    for (a, b) in ours.iter().zip(&oracle) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-9);
    }
}

#[test]
fn haar_unitary_is_orthogonal_with_unit_determinant() {
    for n in [1, 2, 17, 64] {
        let u = to_nalgebra(&HaarUnitary::sample(n, SeededRng::new(n as u64)).as_dense());
        assert!((u.transpose() * &u - nalgebra::DMatrix::identity(n, n)).amax() < 1e-12);
        assert_abs_diff_eq!(u.lu().determinant().abs(), 1.0, epsilon = 1e-10);
    }
}

#[test]
fn haar_apply_matches_dense_product() {
    let u = HaarUnitary::sample(40, SeededRng::new(8));
    let x = gaussian(40, 3, 9);
    let applied = u.apply(&x).unwrap();
    let dense = u.as_dense().matmul(&x).unwrap();
    assert!(applied.max_abs_diff(&dense).unwrap() < 1e-12);
}

#[test]
fn projections_preserve_norms_when_orthogonal() {
    let x = gaussian(48, 2, 4);
    for kind in [
        ProjectionKind::RandomUnitary,
        ProjectionKind::GaussianOrthonormalized,
        ProjectionKind::HadamardSigned,
        ProjectionKind::Identity,
    ] {
        let p = Projection::realize(kind, 48, SeededRng::new(6)).unwrap();
        let y = p.apply_full(&x).unwrap();
        assert_abs_diff_eq!(y.frobenius_norm(), x.frobenius_norm(), epsilon = 1e-10);
    }
}

#[test]
fn least_squares_matches_normal_equations() {
    let mut stream = SeededRng::new(4).stream();
    let a = Matrix::from_fn(100, 5, |_, _| stream.random_range(-1.0..1.0));
    let b = Matrix::from_fn(100, 1, |_, _| stream.random_range(-1.0..1.0));
    let ours = least_squares(&a, &b).unwrap();
    let oracle = normal_equations(&a, &b);
    assert!(ours.max_abs_diff(&oracle).unwrap() < 1e-7);
    let exact = solve_exact(&RegressionProblem::new(a, b, 1).unwrap()).unwrap();
    assert!(exact.x.max_abs_diff(&oracle).unwrap() < 1e-7);
}

#[test]
fn dense_sketch_matches_operator_application() {
    let a = tdist(64, 4, 12);
    let profile = leverage_profile(&a, Partition::new(64, 1).unwrap()).unwrap();
    for kind in SketchKind::ALL {
        let op = SketchOperator::realize(kind, 64, 24, SeededRng::new(13), Some(&profile)).unwrap();
        let dense = op.as_dense().unwrap();
        let via_dense = to_nalgebra(&dense) * to_nalgebra(&a);
        let direct = to_nalgebra(&op.apply(&a).unwrap());
        assert!((via_dense - direct).amax() < 1e-10, "{kind}");
    }
}

#[test]
fn global_operator_is_block_diagonal_stack_of_nodes() {
    let a = gaussian(96, 3, 21);
    let partition = Partition::new(96, 4).unwrap();
    let plan = DistributedPlan::new(4, 6, NodeScheme::Projected(ProjectionKind::RandomUnitary));
    let rng = SeededRng::new(22);
    let configs = node_configs(partition, 6, plan.scheme, SamplingMode::Uniform, rng);
    let dense = materialize_global_operator(&configs).unwrap();
    let op = DistributedOperator::realize(96, &plan, rng, None).unwrap();
    assert!(dense.max_abs_diff(&op.to_dense().unwrap()).unwrap() < 1e-12);
    assert!(
        dense
            .matmul(&a)
            .unwrap()
            .max_abs_diff(&op.apply(&a).unwrap())
            .unwrap()
            < 1e-10
    );
    // Rows of node i only touch columns of block i.
    for i in 0..24 {
        let node = i / 6;
        for j in 0..96 {
            if partition.block_of(j) != node {
                assert_eq!(dense.get(i, j), 0.0);
            }
        }
    }
}

#[test]
fn composite_operator_reproduces_two_stage_pipeline() {
    let a = tdist(512, 6, 31);
    for (local, global) in [
        (NodeScheme::Sketch(SketchKind::Srht), SketchKind::Rademacher),
        (
            NodeScheme::Projected(ProjectionKind::GaussianOrthonormalized),
            SketchKind::Srht,
        ),
        (
            NodeScheme::Sketch(SketchKind::UniformSampling),
            SketchKind::Sjlt,
        ),
        (
            NodeScheme::Sketch(SketchKind::LeverageScore),
            SketchKind::LeverageScore,
        ),
    ] {
        let plan = HybridPlan::from_ratios(512, 6, 8, 0.5, 0.5, local, global).unwrap();
        let rng = SeededRng::new(32);
        let composite = composite_operator(&plan, rng, Some(&a)).unwrap();
        assert_eq!(composite.shape(), (plan.second_dim, 512));
        let lhs = composite.matmul(&a).unwrap();
        let rhs = hybrid_sketch(&a, &plan, rng).unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-9, "{local}+{global}");
    }
}

#[test]
fn embedding_error_matches_dense_formula() {
    let a = tdist(256, 5, 41);
    let op =
        SketchOperator::realize(SketchKind::Gaussian, 256, 80, SeededRng::new(42), None).unwrap();
    let q = to_nalgebra(thin_qr(&a).unwrap().0.u());
    let su = to_nalgebra(&op.as_dense().unwrap()) * q;
    let deviation = nalgebra::DMatrix::identity(5, 5) - su.transpose() * su;
    let oracle = svd_norm(&from_nalgebra(&deviation));
    assert_abs_diff_eq!(se_error(&op, &a).unwrap(), oracle, epsilon = 1e-9);
}
