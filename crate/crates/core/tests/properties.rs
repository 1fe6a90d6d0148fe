//! Randomized invariants.

use hydrosketch::data::{GeneratorKind, GeneratorSpec};
use hydrosketch::distributed::LocalSketch;
use hydrosketch::distributed::{
    DistributedOperator, DistributedPlan, NodeScheme, ProjectionKind, SamplingMode,
};
use hydrosketch::experiment::{ExperimentConfig, ExperimentKind};
use hydrosketch::io::{parse_numeric_csv, read_local_sketch, write_local_sketch, write_matrix};
use hydrosketch::leverage::{leverage_profile, Partition};
use hydrosketch::regression::{
    exact_gradient, se_error, RegressionProblem, SketchedGradientOracle,
};
use hydrosketch::sketch::{LinearSketch, SketchKind, SketchOperator};
use hydrosketch::{Matrix, SeededRng};
use proptest::prelude::*;

fn design(rows: usize, cols: usize, seed: u64) -> Matrix {
    GeneratorSpec::new(GeneratorKind::TDist { dof: 3.0 }, rows, cols)
        .generate(SeededRng::new(seed))
        .unwrap()
}

fn problem(rows: usize, cols: usize, blocks: usize, seed: u64) -> RegressionProblem {
    GeneratorSpec::new(
        GeneratorKind::GaussianNoiseRegression { sigma: 0.1 },
        rows,
        cols,
    )
    .generate_regression(SeededRng::new(seed))
    .unwrap()
    .into_problem(blocks)
    .unwrap()
}

fn sketch_kind() -> impl Strategy<Value = SketchKind> {
    prop::sample::select(SketchKind::ALL.to_vec())
}

fn projection_kind() -> impl Strategy<Value = ProjectionKind> {
    prop::sample::select(ProjectionKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn embedding_error_depends_only_on_column_space(seed in any::<u64>(), cols in 1usize..6, kind in sketch_kind()) {
        let a = design(96, cols, seed);
        // Any invertible upper-triangular mixing keeps the column space.
        let mixing = Matrix::from_fn(cols, cols, |i, j| match i.cmp(&j) {
            std::cmp::Ordering::Equal => 2.0 + i as f64,
            std::cmp::Ordering::Less => 0.5,
            std::cmp::Ordering::Greater => 0.0,
        });
        let mixed = a.matmul(&mixing).unwrap();
        let profile = leverage_profile(&a, Partition::new(96, 1).unwrap()).unwrap();
        let op = SketchOperator::realize(kind, 96, 40, SeededRng::new(seed ^ 1), Some(&profile)).unwrap();
        let lhs = se_error(&op, &a).unwrap();
        let rhs = se_error(&op, &mixed).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-8 * (1.0 + lhs), "{lhs} vs {rhs}");
    }

    #[test]
    fn sketches_are_linear(seed in any::<u64>(), kind in sketch_kind(), out in 1usize..30) {
        let a = design(32, 3, seed);
        let b = design(32, 3, seed.wrapping_add(1));
        let profile = leverage_profile(&a, Partition::new(32, 1).unwrap()).unwrap();
        let op = SketchOperator::realize(kind, 32, out, SeededRng::new(seed), Some(&profile)).unwrap();
        let combined = op.apply(&a.scale(2.0).add(&b).unwrap()).unwrap();
        let separate = op.apply(&a).unwrap().scale(2.0).add(&op.apply(&b).unwrap()).unwrap();
        let scale = 1.0 + combined.max_abs();
        prop_assert!(combined.max_abs_diff(&separate).unwrap() <= 1e-10 * scale);
    }

    #[test]
    fn realization_is_a_function_of_the_seed(seed in any::<u64>(), kind in sketch_kind()) {
        let a = design(40, 2, 7);
        let profile = leverage_profile(&a, Partition::new(40, 1).unwrap()).unwrap();
        let first = SketchOperator::realize(kind, 40, 12, SeededRng::new(seed), Some(&profile)).unwrap();
        let second = SketchOperator::realize(kind, 40, 12, SeededRng::new(seed), Some(&profile)).unwrap();
        prop_assert_eq!(first.apply(&a).unwrap(), second.apply(&a).unwrap());
    }

    #[test]
    fn node_gradients_sum_to_gradient_of_stacked_system(seed in any::<u64>(), projection in projection_kind(), round in 0u64..50) {
        let problem = problem(64, 3, 4, seed);
        let oracle = SketchedGradientOracle::new(&problem, 5, projection, SamplingMode::Uniform, SeededRng::new(seed)).unwrap();
        let x = Matrix::column_vector(vec![0.3, -1.0, 2.0]);
        let total = oracle.gradient(&x, round).unwrap();
        let parts = oracle.node_gradients(&x, round).unwrap();
        prop_assert_eq!(parts.len(), 4);
        let system = oracle.sketched_system(round).unwrap();
        let sa = system.column_range(0..3);
        let sb = system.column_range(3..4);
        let stacked = sa.t_matmul(&sa.matmul(&x).unwrap().sub(&sb).unwrap()).unwrap().scale(2.0);
        prop_assert!(total.max_abs_diff(&stacked).unwrap() <= 1e-9 * (1.0 + stacked.max_abs()));
    }

    #[test]
    fn stacked_system_matches_distributed_operator(seed in any::<u64>(), projection in projection_kind()) {
        let problem = problem(48, 2, 3, seed);
        let rng = SeededRng::new(seed);
        let oracle = SketchedGradientOracle::new(&problem, 4, projection, SamplingMode::Uniform, rng).unwrap();
        let plan = DistributedPlan::new(3, 4, NodeScheme::Projected(projection));
        let op = DistributedOperator::realize(48, &plan, rng, None).unwrap();
        let direct = op.apply(&problem.augmented()).unwrap();
        let system = oracle.sketched_system(0).unwrap();
        prop_assert!(direct.max_abs_diff(&system).unwrap() <= 1e-10 * (1.0 + direct.max_abs()));
    }

    #[test]
    fn unitary_full_sampling_gives_exact_gradient(seed in any::<u64>(), blocks in prop::sample::select(vec![1usize, 2, 4])) {
        let problem = problem(32, 3, blocks, seed);
        let n = 32 / blocks;
        let oracle = SketchedGradientOracle::new(&problem, n, ProjectionKind::RandomUnitary, SamplingMode::InOrder, SeededRng::new(seed)).unwrap();
        let x = Matrix::column_vector(vec![1.0, 0.5, -0.25]);
        let sketched = oracle.gradient(&x, 0).unwrap();
        let exact = exact_gradient(&problem, &x).unwrap();
        prop_assert!(sketched.max_abs_diff(&exact).unwrap() <= 1e-9 * (1.0 + exact.max_abs()));
    }

    #[test]
    fn leverage_scores_sum_to_rank(seed in any::<u64>(), cols in 1usize..8, blocks in prop::sample::select(vec![1usize, 2, 4, 8])) {
        let a = design(64, cols, seed);
        let profile = leverage_profile(&a, Partition::new(64, blocks).unwrap()).unwrap();
        let total: f64 = profile.scores().iter().sum();
        prop_assert!((total - cols as f64).abs() < 1e-9);
        prop_assert!(profile.scores().iter().all(|s| *s >= -1e-12 && *s <= 1.0 + 1e-12));
        prop_assert!(profile.beta_hat() > 0.0 && profile.beta_hat() <= 1.0 + 1e-12);
    }

    #[test]
    fn matrix_csv_round_trips(rows in 1usize..12, cols in 1usize..6, seed in any::<u64>()) {
        let m = design(rows.max(cols), cols, seed);
        let mut buf = Vec::new();
        write_matrix(&m, &mut buf).unwrap();
        prop_assert_eq!(parse_numeric_csv(buf.as_slice()).unwrap(), m);
    }

    #[test]
    fn local_sketch_round_trips(node in 0usize..100, seed in any::<u64>(), rows in 1usize..8) {
        let sketch = LocalSketch { node, seed, payload: design(rows.max(2), 2, seed), sample_rows: Vec::new() };
        let mut buf = Vec::new();
        write_local_sketch(&sketch, &mut buf).unwrap();
        prop_assert_eq!(read_local_sketch(buf.as_slice()).unwrap(), sketch);
    }

    #[test]
    fn configs_round_trip(
        seed in any::<u64>(),
        trials in 1usize..50,
        blocks in prop::collection::vec(prop::sample::select(vec![1usize, 2, 4, 8, 16]), 1..4),
        mu in prop::collection::vec(0.05f64..0.95, 1..4),
        kind in prop::sample::select(vec![ExperimentKind::Flattening, ExperimentKind::SeSweep, ExperimentKind::HybridSe, ExperimentKind::FedAvg]),
    ) {
        let mut cfg = ExperimentConfig::new(kind);
        cfg.seed = seed;
        cfg.trials = trials;
        cfg.blocks = blocks;
        cfg.mu = mu;
        let text = cfg.to_config_string();
        prop_assert_eq!(text.parse::<ExperimentConfig>().unwrap(), cfg);
    }

    #[test]
    fn child_seeds_are_deterministic(seed in any::<u64>(), path in prop::collection::vec(any::<u64>(), 0..5)) {
        let root = SeededRng::new(seed);
        prop_assert_eq!(root.descend(&path), root.descend(&path));
        let folded = path.iter().fold(root, |r, &tag| r.child(tag));
        prop_assert_eq!(root.descend(&path), folded);
    }
}
