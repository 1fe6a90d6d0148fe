//! Sketch-and-solve least squares, the subspace-embedding error, and
//! iteratively sketched distributed gradient descent.

use std::io::Write;

use crate::distributed::{
    sample_rows, NodeConfig, NodeScheme, Projection, ProjectionKind, SamplingMode,
};
use crate::error::{Error, Result};
use crate::leverage::Partition;
use crate::linalg::{least_squares, spectral_norm_robust, thin_orthonormalize, OrthonormalBasis};
use crate::matrix::{axpy, dot, Matrix};
use crate::rng::SeededRng;
use crate::sketch::LinearSketch;

/// Iterates whose norm exceeds this are reported as divergent.
pub const DIVERGENCE_GUARD: f64 = 1e12;

/// `min_x ‖A x − b‖₂` with the rows split over `k` nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionProblem {
    a: Matrix,
    b: Matrix,
    partition: Partition,
}

impl RegressionProblem {
    pub fn new(a: Matrix, b: Matrix, blocks: usize) -> Result<Self> {
        if b.cols() != 1 || b.rows() != a.rows() {
            return Err(Error::DimensionMismatch(format!(
                "design is {}x{}, target is {}x{}",
                a.rows(),
                a.cols(),
                b.rows(),
                b.cols()
            )));
        }
        let partition = Partition::new(a.rows(), blocks)?;
        Ok(Self { a, b, partition })
    }

    pub fn with_blocks(self, blocks: usize) -> Result<Self> {
        Self::new(self.a, self.b, blocks)
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> &Matrix {
        &self.b
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    /// `[A b]`, so one sketch realization can be applied to both.
    pub fn augmented(&self) -> Matrix {
        self.a.hstack(&self.b).expect("rows agree by construction")
    }

    pub fn into_parts(self) -> (Matrix, Matrix) {
        (self.a, self.b)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolutionKind {
    Exact,
    Sketched,
}

/// A least-squares solution with its residuals.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionSolution {
    pub x: Matrix,
    /// Unsketched residual `‖A x − b‖₂`.
    pub residual: f64,
    /// `‖S(A x − b)‖₂` for sketched solutions.
    pub sketched_residual: Option<f64>,
    pub kind: SolutionKind,
}

/// `‖A x − b‖₂`.
pub fn residual_norm(a: &Matrix, b: &Matrix, x: &Matrix) -> Result<f64> {
    Ok(a.matmul(x)?.sub(b)?.frobenius_norm())
}

/// `x* = R⁻¹ Qᵀ b` from a thin QR of `A`.
pub fn solve_exact(problem: &RegressionProblem) -> Result<RegressionSolution> {
    let x = least_squares(&problem.a, &problem.b)?;
    Ok(RegressionSolution {
        residual: residual_norm(&problem.a, &problem.b, &x)?,
        x,
        sketched_residual: None,
        kind: SolutionKind::Exact,
    })
}

/// `x̂ = argmin ‖S A x − S b‖₂`; reports the unsketched residual.
pub fn solve_sketched<S: LinearSketch + ?Sized>(
    problem: &RegressionProblem,
    sketch: &S,
) -> Result<RegressionSolution> {
    let sketched = sketch.apply(&problem.augmented())?;
    let d = problem.a.cols();
    if sketched.rows() < d {
        return Err(Error::SketchRankCollapse);
    }
    let sa = sketched.column_range(0..d);
    let sb = sketched.column_range(d..d + 1);
    let x = match least_squares(&sa, &sb) {
        Ok(x) => x,
        Err(Error::RankDeficient { .. }) => return Err(Error::SketchRankCollapse),
        Err(e) => return Err(e),
    };
    Ok(RegressionSolution {
        residual: residual_norm(&problem.a, &problem.b, &x)?,
        sketched_residual: Some(residual_norm(&sa, &sb, &x)?),
        x,
        kind: SolutionKind::Sketched,
    })
}

/// Subspace-embedding error `‖I_d − (SU)ᵀ(SU)‖₂` with `U` an orthonormal basis of `A`.
pub fn se_error<S: LinearSketch + ?Sized>(sketch: &S, a: &Matrix) -> Result<f64> {
    se_error_for_basis(sketch, &thin_orthonormalize(a)?)
}

/// [`se_error`] for a precomputed basis.
pub fn se_error_for_basis<S: LinearSketch + ?Sized>(
    sketch: &S,
    basis: &OrthonormalBasis,
) -> Result<f64> {
    let su = sketch.apply(basis.u())?;
    let mut deviation = su.gram();
    let d = deviation.rows();
    deviation.scale_in_place(-1.0);
    for i in 0..d {
        deviation.set(i, i, deviation.get(i, i) + 1.0);
    }
    Ok(spectral_norm_robust(&deviation))
}

/// Full gradient `2Aᵀ(Ax − b)`.
pub fn exact_gradient(problem: &RegressionProblem, x: &Matrix) -> Result<Matrix> {
    let residual = problem.a.matmul(x)?.sub(&problem.b)?;
    Ok(problem.a.t_matmul(&residual)?.scale(2.0))
}

/// Step size `η_t`, with `t` counted from zero.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepSchedule {
    /// `η_t = 1/(α(t+1))`.
    InverseAlpha { alpha: f64 },
    /// `η_t = 1/(L(t+1))` with `L = ‖A‖₂²`.
    InverseLipschitz,
}

impl StepSchedule {
    pub fn eta(&self, t: usize, lipschitz: f64) -> f64 {
        let scale = match self {
            StepSchedule::InverseAlpha { alpha } => *alpha,
            StepSchedule::InverseLipschitz => lipschitz,
        };
        1.0 / (scale * (t + 1) as f64)
    }
}

/// Settings of iteratively sketched gradient descent.
#[derive(Clone, Debug, PartialEq)]
pub struct GdConfig {
    pub iterations: usize,
    pub schedule: StepSchedule,
    /// Draw a fresh row sample at every iteration (otherwise reuse round 0).
    pub refresh: bool,
    /// Rows `r` sampled per node.
    pub samples_per_node: usize,
    pub projection: ProjectionKind,
    pub sampling: SamplingMode,
    /// Starting point; zero when absent.
    pub initial: Option<Matrix>,
}

impl GdConfig {
    pub fn new(iterations: usize, samples_per_node: usize, projection: ProjectionKind) -> Self {
        Self {
            iterations,
            schedule: StepSchedule::InverseLipschitz,
            refresh: true,
            samples_per_node,
            projection,
            sampling: SamplingMode::Uniform,
            initial: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidArgument(
                "at least one iteration is required".into(),
            ));
        }
        if let StepSchedule::InverseAlpha { alpha } = self.schedule {
            if !(alpha > 0.0) {
                return Err(Error::OutOfRange {
                    name: "alpha",
                    value: alpha,
                    range: "(0, ∞)",
                });
            }
        }
        Ok(())
    }
}

/// One row of a descent trace: the state after `t` updates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub t: usize,
    /// Step size of the update that produced this state (0 for the start).
    pub eta: f64,
    /// `‖A x^[t] − b‖₂²`.
    pub loss: f64,
    /// `‖x^[t] − x*‖₂ / ‖x*‖₂`.
    pub err_to_opt: f64,
}

/// Final state and trace of a descent run.
#[derive(Clone, Debug, PartialEq)]
pub struct GdState {
    pub x: Matrix,
    pub t: usize,
    pub optimum: Matrix,
    pub global_gradient: Matrix,
    pub node_gradients: Vec<Matrix>,
    pub trace: Vec<TraceRow>,
}

impl GdState {
    pub fn final_error(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.err_to_opt)
    }

    /// Relative error after `t` updates.
    pub fn error_at(&self, t: usize) -> Option<f64> {
        self.trace.get(t).map(|r| r.err_to_opt)
    }

    /// CSV with header `t,eta,loss,err_to_opt`.
    pub fn write_trace_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,eta,loss,err_to_opt")?;
        for row in &self.trace {
            writeln!(out, "{},{},{},{}", row.t, row.eta, row.loss, row.err_to_opt)?;
        }
        Ok(())
    }
}

struct NodeData {
    config: NodeConfig,
    /// `√(p/r) · P_i [A_i b_i]`, computed once.
    transformed: Matrix,
}

/// Per-node sketched gradients `ĝ_i = 2 Â_iᵀ(Â_i x − b̂_i)` over fresh row samples.
///
/// Node `i` projects once with the seed of `rng.child(i)` and draws the
/// round-`t` sample from its round-`t` sampling seed, matching the seeds of
/// the distributed first stage.
pub struct SketchedGradientOracle {
    nodes: Vec<NodeData>,
    cols: usize,
}

impl SketchedGradientOracle {
    pub fn new(
        problem: &RegressionProblem,
        samples_per_node: usize,
        projection: ProjectionKind,
        sampling: SamplingMode,
        rng: SeededRng,
    ) -> Result<Self> {
        if samples_per_node == 0 {
            return Err(Error::InvalidArgument(
                "nodes need at least one sample".into(),
            ));
        }
        let augmented = problem.augmented();
        let partition = problem.partition;
        let nodes = partition
            .ranges()
            .enumerate()
            .map(|(i, range)| {
                let config = NodeConfig::new(
                    i,
                    partition.block_rows(),
                    samples_per_node,
                    NodeScheme::Projected(projection),
                    rng.child(i as u64),
                )
                .with_sampling(sampling);
                let p = Projection::realize(projection, config.rows, config.projection_seed())?;
                let mut transformed = p.apply_full(&augmented.row_range(range))?;
                transformed
                    .scale_in_place((p.output_rows() as f64 / samples_per_node as f64).sqrt());
                Ok(NodeData {
                    config,
                    transformed,
                })
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            nodes,
            cols: problem.a.cols(),
        })
    }

    pub fn nodes(&self) -> usize {
        self.nodes.len()
    }

    fn sampled_rows(&self, node: usize, round: u64) -> Result<Vec<usize>> {
        let data = &self.nodes[node];
        sample_rows(
            data.transformed.rows(),
            data.config.samples,
            data.config.sampling,
            data.config.sampling_seed(round),
        )
    }

    /// `ĝ_i` of one node at `x` for the round-`round` sample.
    pub fn node_gradient(&self, node: usize, x: &Matrix, round: u64) -> Result<Matrix> {
        if x.rows() != self.cols || x.cols() != 1 {
            return Err(Error::DimensionMismatch(format!(
                "iterate must be {}x1, got {}x{}",
                self.cols,
                x.rows(),
                x.cols()
            )));
        }
        let d = self.cols;
        let data = &self.nodes[node].transformed;
        let mut g = vec![0.0; d];
        for row in self.sampled_rows(node, round)? {
            let values = data.row(row);
            let residual = dot(&values[..d], x.data()) - values[d];
            axpy(&mut g, 2.0 * residual, &values[..d]);
        }
        Ok(Matrix::column_vector(g))
    }

    pub fn node_gradients(&self, x: &Matrix, round: u64) -> Result<Vec<Matrix>> {
        (0..self.nodes.len())
            .map(|i| self.node_gradient(i, x, round))
            .collect()
    }

    /// `ĝ = Σ_i ĝ_i`.
    pub fn gradient(&self, x: &Matrix, round: u64) -> Result<Matrix> {
        sum_columns(&self.node_gradients(x, round)?, self.cols)
    }

    /// The stacked sketched system `[Â b̂]` of one round.
    pub fn sketched_system(&self, round: u64) -> Result<Matrix> {
        let parts: Vec<Matrix> = (0..self.nodes.len())
            .map(|i| {
                Ok(self.nodes[i]
                    .transformed
                    .select_rows(&self.sampled_rows(i, round)?))
            })
            .collect::<Result<_>>()?;
        Matrix::vstack(&parts.iter().collect::<Vec<_>>())
    }
}

fn sum_columns(parts: &[Matrix], rows: usize) -> Result<Matrix> {
    let mut total = Matrix::zeros(rows, 1);
    for p in parts {
        total.add_assign(p)?;
    }
    Ok(total)
}

struct Tracker {
    optimum: Matrix,
    optimum_norm: f64,
    lipschitz: f64,
}

impl Tracker {
    fn new(problem: &RegressionProblem) -> Result<Self> {
        let optimum = solve_exact(problem)?.x;
        let norm = optimum.frobenius_norm();
        Ok(Self {
            optimum_norm: if norm > 0.0 { norm } else { 1.0 },
            optimum,
            lipschitz: spectral_norm_robust(problem.a()).powi(2),
        })
    }

    fn row(&self, problem: &RegressionProblem, t: usize, eta: f64, x: &Matrix) -> Result<TraceRow> {
        let norm = x.frobenius_norm();
        if !(norm <= DIVERGENCE_GUARD) {
            return Err(Error::Divergence { iteration: t, norm });
        }
        Ok(TraceRow {
            t,
            eta,
            loss: residual_norm(problem.a(), problem.b(), x)?.powi(2),
            err_to_opt: x.sub(&self.optimum)?.frobenius_norm() / self.optimum_norm,
        })
    }
}

fn initial_iterate(problem: &RegressionProblem, cfg: &GdConfig) -> Result<Matrix> {
    let d = problem.a().cols();
    match &cfg.initial {
        Some(x) if x.shape() == (d, 1) => Ok(x.clone()),
        Some(x) => Err(Error::DimensionMismatch(format!(
            "initial iterate must be {d}x1, got {}x{}",
            x.rows(),
            x.cols()
        ))),
        None => Ok(Matrix::zeros(d, 1)),
    }
}

/// Distributed iteratively sketched gradient descent.
///
/// Nodes project their data once, then at every iteration sample `r` rows of
/// the projected data and send `ĝ_i`; the coordinator steps along `Σ ĝ_i`.
pub fn iterative_sketched_gd(
    problem: &RegressionProblem,
    cfg: &GdConfig,
    rng: SeededRng,
) -> Result<GdState> {
    cfg.validate()?;
    let tracker = Tracker::new(problem)?;
    let oracle = SketchedGradientOracle::new(
        problem,
        cfg.samples_per_node,
        cfg.projection,
        cfg.sampling,
        rng,
    )?;
    let mut x = initial_iterate(problem, cfg)?;
    let mut trace = vec![tracker.row(problem, 0, 0.0, &x)?];
    let mut node_gradients = Vec::new();
    let mut global = Matrix::zeros(x.rows(), 1);
    for t in 0..cfg.iterations {
        let round = if cfg.refresh { t as u64 } else { 0 };
        let eta = cfg.schedule.eta(t, tracker.lipschitz);
        node_gradients = oracle.node_gradients(&x, round)?;
        global = sum_columns(&node_gradients, x.rows())?;
        axpy(x.data_mut(), -eta, global.data());
        trace.push(tracker.row(problem, t + 1, eta, &x)?);
    }
    Ok(GdState {
        x,
        t: cfg.iterations,
        optimum: tracker.optimum,
        global_gradient: global,
        node_gradients,
        trace,
    })
}

/// FedAvg on sketched local data.
///
/// In round `t` every node starts from `x^[t]` and takes `local_epochs` steps
/// `x ← x − η_t k ĝ_i(x)`, each on its own row sample; the coordinator
/// averages the node iterates. With one local epoch this is exactly
/// [`iterative_sketched_gd`].
pub fn fedavg_sketched(
    problem: &RegressionProblem,
    cfg: &GdConfig,
    local_epochs: usize,
    rng: SeededRng,
) -> Result<GdState> {
    cfg.validate()?;
    if local_epochs == 0 {
        return Err(Error::InvalidArgument(
            "at least one local epoch is required".into(),
        ));
    }
    let tracker = Tracker::new(problem)?;
    let oracle = SketchedGradientOracle::new(
        problem,
        cfg.samples_per_node,
        cfg.projection,
        cfg.sampling,
        rng,
    )?;
    let k = oracle.nodes();
    let mut x = initial_iterate(problem, cfg)?;
    let mut trace = vec![tracker.row(problem, 0, 0.0, &x)?];
    let mut node_gradients = vec![Matrix::zeros(x.rows(), 1); k];
    for t in 0..cfg.iterations {
        let eta = cfg.schedule.eta(t, tracker.lipschitz);
        let mut next = Matrix::zeros(x.rows(), 1);
        for (node, last) in node_gradients.iter_mut().enumerate() {
            let mut local = x.clone();
            for epoch in 0..local_epochs {
                let round = if cfg.refresh {
                    (t * local_epochs + epoch) as u64
                } else {
                    0
                };
                *last = oracle.node_gradient(node, &local, round)?;
                axpy(local.data_mut(), -eta * k as f64, last.data());
            }
            next.add_assign(&local)?;
        }
        next.scale_in_place(1.0 / k as f64);
        x = next;
        trace.push(tracker.row(problem, t + 1, eta, &x)?);
    }
    let global = sum_columns(&node_gradients, x.rows())?;
    Ok(GdState {
        x,
        t: cfg.iterations,
        optimum: tracker.optimum,
        global_gradient: global,
        node_gradients,
        trace,
    })
}
