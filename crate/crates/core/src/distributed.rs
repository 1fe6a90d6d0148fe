//! Distributed local sketching over a simulated network of `k` nodes.
//!
//! Node `i` holds the row block `A_i` (`n x d`), applies a random projection
//! `P_i`, keeps `r` uniformly sampled rows and rescales by `√(n/r)`. The
//! coordinator stacks the payloads, which amounts to applying the
//! block-diagonal global sketch `Ŝ = diag(√(n/r) Ω_i P_i)` to `A`.
//!
//! Node `i` draws its randomness from `rng.child(i)`: the projection from
//! `child(0)` and the round-`t` sample from `child(1).child(t)`, so results do
//! not depend on the order in which nodes run.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hadamard::{fwht_rows_in_place, pad_to_power_of_two};
use crate::leverage::{leverage_profile, Partition};
use crate::linalg::{gram_schmidt_orthogonalize, HaarUnitary};
use crate::matrix::{axpy, Matrix};
use crate::rng::SeededRng;
use crate::sketch::{LinearSketch, SketchKind, SketchOperator, DENSE_LIMIT};

const PERMUTATION_TAG: u64 = 0xFFFF_FFFF;

/// Random square projection applied by a node before sampling.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ProjectionKind {
    /// Haar-distributed orthogonal matrix (Householder product).
    RandomUnitary,
    /// Gram–Schmidt orthogonalization of a square Gaussian draw.
    GaussianOrthonormalized,
    /// Normalized Hadamard times a random sign diagonal; pads to a power of two.
    HadamardSigned,
    /// Dense `±1/√n` matrix; isotropic but not orthogonal.
    Rademacher,
    Identity,
}

impl ProjectionKind {
    pub const ALL: [ProjectionKind; 5] = [
        ProjectionKind::RandomUnitary,
        ProjectionKind::GaussianOrthonormalized,
        ProjectionKind::HadamardSigned,
        ProjectionKind::Rademacher,
        ProjectionKind::Identity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProjectionKind::RandomUnitary => "unitary",
            ProjectionKind::GaussianOrthonormalized => "gaussian-orth",
            ProjectionKind::HadamardSigned => "hadamard",
            ProjectionKind::Rademacher => "rademacher",
            ProjectionKind::Identity => "identity",
        }
    }
}

impl fmt::Display for ProjectionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProjectionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "unitary" | "random-unitary" => Ok(ProjectionKind::RandomUnitary),
            "gaussian-orth" | "gaussian" => Ok(ProjectionKind::GaussianOrthonormalized),
            "hadamard" | "hadamard-signed" => Ok(ProjectionKind::HadamardSigned),
            "rademacher" => Ok(ProjectionKind::Rademacher),
            "identity" | "none" => Ok(ProjectionKind::Identity),
            other => Err(Error::InvalidArgument(format!(
                "unknown projection kind `{other}`"
            ))),
        }
    }
}

/// How a node picks its `r` rows after projecting.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Default)]
pub enum SamplingMode {
    /// Uniform with replacement.
    #[default]
    Uniform,
    /// The first `r` rows, in order (diagnostic mode).
    InOrder,
}

/// What a node applies to its block.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NodeScheme {
    /// `√(n/r) · Ω · P` with a random projection `P`.
    Projected(ProjectionKind),
    /// A single-stage sketch of the given kind from `n` to `r` rows.
    Sketch(SketchKind),
}

impl fmt::Display for NodeScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeScheme::Sketch(kind) => write!(f, "{kind}"),
            NodeScheme::Projected(ProjectionKind::Rademacher) => f.write_str("rademacher-proj"),
            NodeScheme::Projected(kind) => write!(f, "{kind}"),
        }
    }
}

impl FromStr for NodeScheme {
    type Err = Error;

    /// Sketch kind names map to [`NodeScheme::Sketch`]; projection names (and
    /// `rademacher-proj`) map to [`NodeScheme::Projected`].
    fn from_str(s: &str) -> Result<Self> {
        if let Ok(kind) = s.parse::<SketchKind>() {
            return Ok(NodeScheme::Sketch(kind));
        }
        let trimmed = s.trim();
        let name = trimmed.strip_suffix("-proj").unwrap_or(trimmed);
        if name == "gaussian" {
            return Err(Error::InvalidArgument(
                "use `gaussian-orth` for the orthonormalized Gaussian projection".into(),
            ));
        }
        name.parse::<ProjectionKind>().map(NodeScheme::Projected)
    }
}

/// A realized node projection `P_i`.
#[derive(Clone, Debug)]
pub enum Projection {
    Unitary(HaarUnitary),
    Dense(Matrix),
    HadamardSigned { rows: usize, signs: Vec<f64> },
    Rademacher { rows: usize, rng: SeededRng },
    Identity(usize),
}

impl Projection {
    pub fn realize(kind: ProjectionKind, rows: usize, rng: SeededRng) -> Result<Self> {
        Ok(match kind {
            ProjectionKind::RandomUnitary => Projection::Unitary(HaarUnitary::sample(rows, rng)),
            ProjectionKind::GaussianOrthonormalized => {
                let mut stream = rng.stream();
                let g = Matrix::from_fn(rows, rows, |_, _| {
                    stream.sample::<f64, _>(rand_distr::StandardNormal)
                });
                Projection::Dense(gram_schmidt_orthogonalize(&g)?)
            }
            ProjectionKind::HadamardSigned => {
                let mut stream = rng.stream();
                let padded = rows.next_power_of_two();
                let signs = (0..padded)
                    .map(|_| if stream.random::<bool>() { 1.0 } else { -1.0 })
                    .collect();
                Projection::HadamardSigned { rows, signs }
            }
            ProjectionKind::Rademacher => Projection::Rademacher { rows, rng },
            ProjectionKind::Identity => Projection::Identity(rows),
        })
    }

    /// Rows consumed, `n`.
    pub fn input_rows(&self) -> usize {
        match self {
            Projection::Unitary(q) => q.dim(),
            Projection::Dense(m) => m.cols(),
            Projection::HadamardSigned { rows, .. }
            | Projection::Rademacher { rows, .. }
            | Projection::Identity(rows) => *rows,
        }
    }

    /// Rows produced; the padded order for Hadamard projections, `n` otherwise.
    pub fn output_rows(&self) -> usize {
        match self {
            Projection::HadamardSigned { signs, .. } => signs.len(),
            other => other.input_rows(),
        }
    }

    /// `P · A`.
    pub fn apply_full(&self, a: &Matrix) -> Result<Matrix> {
        self.check_rows(a)?;
        match self {
            Projection::Unitary(q) => q.apply(a),
            Projection::Dense(m) => m.matmul(a),
            Projection::HadamardSigned { signs, .. } => {
                let (mut padded, _) = pad_to_power_of_two(a);
                for (i, s) in signs.iter().enumerate().take(a.rows()) {
                    padded.row_mut(i).iter_mut().for_each(|v| *v *= s);
                }
                fwht_rows_in_place(&mut padded)?;
                padded.scale_in_place(1.0 / (signs.len() as f64).sqrt());
                Ok(padded)
            }
            Projection::Rademacher { rows, .. } => {
                self.apply_rows(a, &(0..*rows).collect::<Vec<_>>())
            }
            Projection::Identity(_) => Ok(a.clone()),
        }
    }

    /// Selected rows of `P · A`, computed without forming all of `P · A` when possible.
    pub fn apply_rows(&self, a: &Matrix, rows: &[usize]) -> Result<Matrix> {
        self.check_rows(a)?;
        match self {
            Projection::Dense(m) => m.select_rows(rows).matmul(a),
            Projection::Rademacher { rows: n, rng } => {
                let scale = 1.0 / (*n as f64).sqrt();
                let mut out = Matrix::zeros(rows.len(), a.cols());
                for (i, &row) in rows.iter().enumerate() {
                    let mut stream = rng.child(row as u64).stream();
                    let target = out.row_mut(i);
                    let mut bits = 0u64;
                    for j in 0..*n {
                        if j % 64 == 0 {
                            bits = stream.random();
                        }
                        let s = if bits >> (j % 64) & 1 == 1 {
                            scale
                        } else {
                            -scale
                        };
                        axpy(target, s, a.row(j));
                    }
                }
                Ok(out)
            }
            Projection::Identity(_) => Ok(a.select_rows(rows)),
            _ => Ok(self.apply_full(a)?.select_rows(rows)),
        }
    }

    fn check_rows(&self, a: &Matrix) -> Result<()> {
        if a.rows() != self.input_rows() {
            return Err(Error::DimensionMismatch(format!(
                "projection of order {} applied to {} rows",
                self.input_rows(),
                a.rows()
            )));
        }
        Ok(())
    }
}

impl LinearSketch for Projection {
    fn input_dim(&self) -> usize {
        self.input_rows()
    }

    fn output_dim(&self) -> usize {
        self.output_rows()
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        self.apply_full(a)
    }
}

/// Configuration of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NodeConfig {
    pub node: usize,
    /// Local rows `n`.
    pub rows: usize,
    /// Local sample count `r`.
    pub samples: usize,
    pub scheme: NodeScheme,
    pub sampling: SamplingMode,
    pub rng: SeededRng,
}

impl NodeConfig {
    pub fn new(
        node: usize,
        rows: usize,
        samples: usize,
        scheme: NodeScheme,
        rng: SeededRng,
    ) -> Self {
        Self {
            node,
            rows,
            samples,
            scheme,
            sampling: SamplingMode::Uniform,
            rng,
        }
    }

    pub fn with_sampling(mut self, sampling: SamplingMode) -> Self {
        self.sampling = sampling;
        self
    }

    /// Seed of the projection (or of the whole sketch for [`NodeScheme::Sketch`]).
    pub fn projection_seed(&self) -> SeededRng {
        self.rng.child(0)
    }

    /// Seed of the round-`round` row sample.
    pub fn sampling_seed(&self, round: u64) -> SeededRng {
        self.rng.child(1).child(round)
    }
}

/// Draws `samples` row indices out of `available` rows.
pub fn sample_rows(
    available: usize,
    samples: usize,
    mode: SamplingMode,
    rng: SeededRng,
) -> Result<Vec<usize>> {
    match mode {
        SamplingMode::Uniform => {
            let mut stream = rng.stream();
            Ok((0..samples)
                .map(|_| stream.random_range(0..available))
                .collect())
        }
        SamplingMode::InOrder => {
            if samples > available {
                return Err(Error::InvalidArgument(format!(
                    "in-order sampling of {samples} rows out of {available}"
                )));
            }
            Ok((0..samples).collect())
        }
    }
}

#[derive(Clone, Debug)]
enum NodeRealization {
    Projected {
        projection: Projection,
        rows: Vec<usize>,
        scale: f64,
    },
    Sketch(SketchOperator),
}

/// The realized local sketch `S_i` of one node.
#[derive(Clone, Debug)]
pub struct NodeOperator {
    config: NodeConfig,
    realization: NodeRealization,
}

impl NodeOperator {
    /// Realizes the node. `block` is only consulted by leverage-score sketches.
    pub fn realize(config: NodeConfig, block: Option<&Matrix>) -> Result<Self> {
        if config.samples == 0 || config.rows == 0 {
            return Err(Error::InvalidArgument(
                "nodes need at least one row and one sample".into(),
            ));
        }
        let realization = match config.scheme {
            NodeScheme::Projected(kind) => {
                let projection = Projection::realize(kind, config.rows, config.projection_seed())?;
                let available = projection.output_rows();
                let rows = sample_rows(
                    available,
                    config.samples,
                    config.sampling,
                    config.sampling_seed(0),
                )?;
                let scale = (available as f64 / config.samples as f64).sqrt();
                NodeRealization::Projected {
                    projection,
                    rows,
                    scale,
                }
            }
            NodeScheme::Sketch(kind) => {
                let profile = match (kind.needs_profile(), block) {
                    (true, Some(b)) => Some(leverage_profile(b, Partition::new(b.rows(), 1)?)?),
                    (true, None) => return Err(Error::MissingAux),
                    (false, _) => None,
                };
                NodeRealization::Sketch(SketchOperator::realize(
                    kind,
                    config.rows,
                    config.samples,
                    config.projection_seed(),
                    profile.as_ref(),
                )?)
            }
        };
        Ok(Self {
            config,
            realization,
        })
    }

    pub fn config(&self) -> &NodeConfig {
        &self.config
    }

    /// Row indices kept by the node, when the scheme samples rows.
    pub fn sample_rows(&self) -> Vec<usize> {
        match &self.realization {
            NodeRealization::Projected { rows, .. } => rows.clone(),
            NodeRealization::Sketch(op) => op
                .sample_indices()
                .map(<[usize]>::to_vec)
                .unwrap_or_default(),
        }
    }

    pub fn projection(&self) -> Option<&Projection> {
        match &self.realization {
            NodeRealization::Projected { projection, .. } => Some(projection),
            NodeRealization::Sketch(_) => None,
        }
    }
}

impl LinearSketch for NodeOperator {
    fn input_dim(&self) -> usize {
        self.config.rows
    }

    fn output_dim(&self) -> usize {
        self.config.samples
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        match &self.realization {
            NodeRealization::Projected {
                projection,
                rows,
                scale,
            } => {
                let mut out = projection.apply_rows(a, rows)?;
                out.scale_in_place(*scale);
                Ok(out)
            }
            NodeRealization::Sketch(op) => op.apply(a),
        }
    }
}

/// Payload `S_i A_i` delivered by one node.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalSketch {
    pub node: usize,
    pub seed: u64,
    pub payload: Matrix,
    pub sample_rows: Vec<usize>,
}

/// Row-stacked local sketches, `Â = [S_1A_1; …; S_kA_k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlobalSketch {
    pub sketch: Matrix,
    pub nodes: Vec<usize>,
    pub local_rows: Vec<usize>,
    pub seeds: Vec<u64>,
    /// Dense `Ŝ`, when it was materialized.
    pub materialized: Option<Matrix>,
}

/// Runs one node: realizes `S_i` from `config` and applies it to `block`.
pub fn node_sketch(block: &Matrix, config: NodeConfig) -> Result<LocalSketch> {
    if block.rows() != config.rows {
        return Err(Error::DimensionMismatch(format!(
            "node {} expects {} rows, block has {}",
            config.node,
            config.rows,
            block.rows()
        )));
    }
    let op = NodeOperator::realize(config, Some(block))?;
    Ok(LocalSketch {
        node: config.node,
        seed: config.rng.seed(),
        payload: op.apply(block)?,
        sample_rows: op.sample_rows(),
    })
}

/// Coordinator step: stacks payloads in node order.
pub fn aggregate(sketches: &[LocalSketch]) -> Result<GlobalSketch> {
    let first = sketches.first().ok_or(Error::MissingNode(0))?;
    let cols = first.payload.cols();
    let mut ordered: Vec<&LocalSketch> = sketches.iter().collect();
    ordered.sort_by_key(|s| s.node);
    for (expected, s) in ordered.iter().enumerate() {
        if s.node != expected {
            if s.node < expected {
                return Err(Error::InvalidArgument(format!(
                    "node {} appears twice",
                    s.node
                )));
            }
            return Err(Error::MissingNode(expected));
        }
        if s.payload.cols() != cols {
            return Err(Error::ColumnMismatch {
                node: s.node,
                expected: cols,
                found: s.payload.cols(),
            });
        }
    }
    let payloads: Vec<&Matrix> = ordered.iter().map(|s| &s.payload).collect();
    Ok(GlobalSketch {
        sketch: Matrix::vstack(&payloads)?,
        nodes: ordered.iter().map(|s| s.node).collect(),
        local_rows: ordered.iter().map(|s| s.payload.rows()).collect(),
        seeds: ordered.iter().map(|s| s.seed).collect(),
        materialized: None,
    })
}

/// Node configurations of a `k`-node network, node `i` seeded with `rng.child(i)`.
pub fn node_configs(
    partition: Partition,
    samples: usize,
    scheme: NodeScheme,
    sampling: SamplingMode,
    rng: SeededRng,
) -> Vec<NodeConfig> {
    (0..partition.blocks())
        .map(|i| {
            NodeConfig::new(
                i,
                partition.block_rows(),
                samples,
                scheme,
                rng.child(i as u64),
            )
            .with_sampling(sampling)
        })
        .collect()
}

/// Algorithm 1 end to end: every node sketches its block, the coordinator stacks.
pub fn distributed_sketch(
    a: &Matrix,
    partition: Partition,
    samples: usize,
    scheme: NodeScheme,
    rng: SeededRng,
) -> Result<GlobalSketch> {
    check_partition(a, partition)?;
    if samples < a.cols() {
        log::warn!(
            "per-node sample count r = {samples} is below d = {}; the global sketch cannot embed the column space",
            a.cols()
        );
    }
    let configs = node_configs(partition, samples, scheme, SamplingMode::Uniform, rng);
    let locals: Vec<LocalSketch> = configs
        .par_iter()
        .zip(partition.ranges().collect::<Vec<_>>())
        .map(|(cfg, range)| node_sketch(&a.row_range(range), *cfg))
        .collect::<Result<_>>()?;
    aggregate(&locals)
}

fn check_partition(a: &Matrix, partition: Partition) -> Result<()> {
    if a.rows() != partition.total_rows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, partition covers {}",
            a.rows(),
            partition.total_rows()
        )));
    }
    Ok(())
}

/// Dense block-diagonal `Ŝ` for a list of node configurations.
pub fn materialize_global_operator(configs: &[NodeConfig]) -> Result<Matrix> {
    let total: usize = configs.iter().map(|c| c.rows).sum();
    if total > DENSE_LIMIT {
        return Err(Error::TooLarge {
            in_dim: total,
            limit: DENSE_LIMIT,
        });
    }
    let out_rows: usize = configs.iter().map(|c| c.samples).sum();
    let mut s = Matrix::zeros(out_rows, total);
    let (mut row0, mut col0) = (0, 0);
    for cfg in configs {
        let block = NodeOperator::realize(*cfg, None)?.to_dense()?;
        for i in 0..block.rows() {
            s.row_mut(row0 + i)[col0..col0 + block.cols()].copy_from_slice(block.row(i));
        }
        row0 += block.rows();
        col0 += block.cols();
    }
    Ok(s)
}

/// Shape of a distributed first stage.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistributedPlan {
    pub blocks: usize,
    pub samples_per_node: usize,
    pub scheme: NodeScheme,
    pub sampling: SamplingMode,
    /// Apply a global random row permutation before partitioning (off by default).
    pub permute: bool,
}

impl DistributedPlan {
    pub fn new(blocks: usize, samples_per_node: usize, scheme: NodeScheme) -> Self {
        Self {
            blocks,
            samples_per_node,
            scheme,
            sampling: SamplingMode::Uniform,
            permute: false,
        }
    }
}

/// The global sketch `Ŝ` as an operator: node operators plus optional permutation.
#[derive(Clone, Debug)]
pub struct DistributedOperator {
    partition: Partition,
    nodes: Vec<NodeOperator>,
    permutation: Option<Vec<usize>>,
}

impl DistributedOperator {
    /// Realizes all nodes. `data` is needed only for leverage-score node sketches.
    pub fn realize(
        total_rows: usize,
        plan: &DistributedPlan,
        rng: SeededRng,
        data: Option<&Matrix>,
    ) -> Result<Self> {
        let partition = Partition::new(total_rows, plan.blocks)?;
        let permutation = plan.permute.then(|| {
            let mut perm: Vec<usize> = (0..total_rows).collect();
            perm.shuffle(&mut rng.child(PERMUTATION_TAG).stream());
            perm
        });
        let permuted = match (&permutation, data) {
            (Some(p), Some(a)) => Some(a.select_rows(p)),
            _ => None,
        };
        let data = permuted.as_ref().or(data);
        if let Some(a) = data {
            check_partition(a, partition)?;
        }
        let nodes = node_configs(
            partition,
            plan.samples_per_node,
            plan.scheme,
            plan.sampling,
            rng,
        )
        .into_iter()
        .zip(partition.ranges())
        .map(|(cfg, range)| {
            let block = data.map(|a| a.row_range(range));
            NodeOperator::realize(cfg, block.as_ref())
        })
        .collect::<Result<_>>()?;
        Ok(Self {
            partition,
            nodes,
            permutation,
        })
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }

    pub fn nodes(&self) -> &[NodeOperator] {
        &self.nodes
    }

    pub fn permutation(&self) -> Option<&[usize]> {
        self.permutation.as_deref()
    }

    /// Applies every node to its block, returning the unstacked payloads.
    pub fn apply_nodes(&self, a: &Matrix) -> Result<Vec<Matrix>> {
        check_partition(a, self.partition)?;
        let permuted = self.permutation.as_ref().map(|p| a.select_rows(p));
        let source = permuted.as_ref().unwrap_or(a);
        self.nodes
            .par_iter()
            .zip(self.partition.ranges().collect::<Vec<_>>())
            .map(|(node, range)| node.apply(&source.row_range(range)))
            .collect()
    }
}

impl LinearSketch for DistributedOperator {
    fn input_dim(&self) -> usize {
        self.partition.total_rows()
    }

    fn output_dim(&self) -> usize {
        self.nodes.iter().map(|n| n.output_dim()).sum()
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        let parts = self.apply_nodes(a)?;
        Matrix::vstack(&parts.iter().collect::<Vec<_>>())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix(rows: usize, cols: usize) -> Matrix {
        Matrix::from_fn(rows, cols, |i, j| {
            ((i * 7 + j * 13) % 17) as f64 - 8.0 + 0.1 * i as f64
        })
    }

    #[test]
    fn scheme_names_round_trip() {
        for kind in SketchKind::ALL {
            let s = NodeScheme::Sketch(kind);
            assert_eq!(s.to_string().parse::<NodeScheme>().unwrap(), s);
        }
        for kind in ProjectionKind::ALL {
            let s = NodeScheme::Projected(kind);
            assert_eq!(s.to_string().parse::<NodeScheme>().unwrap(), s);
            assert_eq!(kind.name().parse::<ProjectionKind>().unwrap(), kind);
        }
    }

    #[test]
    fn identity_node_returns_block() {
        let a = sample_matrix(6, 2);
        let cfg = NodeConfig::new(
            0,
            6,
            6,
            NodeScheme::Projected(ProjectionKind::Identity),
            SeededRng::new(1),
        )
        .with_sampling(SamplingMode::InOrder);
        let local = node_sketch(&a, cfg).unwrap();
        assert_eq!(local.payload, a);
    }

    #[test]
    fn unitary_full_sampling_preserves_norm() {
        let a = sample_matrix(12, 3);
        for kind in [
            ProjectionKind::RandomUnitary,
            ProjectionKind::GaussianOrthonormalized,
        ] {
            let cfg = NodeConfig::new(0, 12, 12, NodeScheme::Projected(kind), SeededRng::new(5))
                .with_sampling(SamplingMode::InOrder);
            let local = node_sketch(&a, cfg).unwrap();
            assert!((local.payload.frobenius_norm() - a.frobenius_norm()).abs() < 1e-10);
        }
    }

    #[test]
    fn aggregation_order_and_errors() {
        let mk = |node, rows, cols| LocalSketch {
            node,
            seed: 0,
            payload: Matrix::from_fn(rows, cols, |i, _| (node * 10 + i) as f64),
            sample_rows: vec![],
        };
        let g = aggregate(&[mk(1, 2, 3), mk(0, 2, 3)]).unwrap();
        assert_eq!(g.sketch.rows(), 4);
        assert_eq!(g.sketch.get(2, 0), 10.0);
        assert_eq!(g.nodes, vec![0, 1]);
        assert!(matches!(
            aggregate(&[mk(0, 2, 3), mk(2, 2, 3)]),
            Err(Error::MissingNode(1))
        ));
        assert!(matches!(
            aggregate(&[mk(0, 2, 3), mk(1, 2, 4)]),
            Err(Error::ColumnMismatch { node: 1, .. })
        ));
        assert!(matches!(aggregate(&[]), Err(Error::MissingNode(0))));
        let single = aggregate(&[mk(0, 3, 2)]).unwrap();
        assert_eq!(single.sketch, mk(0, 3, 2).payload);
    }

    #[test]
    fn materialized_example() {
        let configs: Vec<NodeConfig> = (0..2)
            .map(|i| {
                NodeConfig::new(
                    i,
                    2,
                    1,
                    NodeScheme::Projected(ProjectionKind::Identity),
                    SeededRng::new(i as u64),
                )
                .with_sampling(SamplingMode::InOrder)
            })
            .collect();
        let s = materialize_global_operator(&configs).unwrap();
        let r2 = 2f64.sqrt();
        let expected =
            Matrix::from_rows(&[vec![r2, 0.0, 0.0, 0.0], vec![0.0, 0.0, r2, 0.0]]).unwrap();
        assert_eq!(s, expected);
    }

    #[test]
    fn distributed_matches_operator_path() {
        let a = sample_matrix(32, 3);
        let partition = Partition::new(32, 4).unwrap();
        let scheme = NodeScheme::Projected(ProjectionKind::RandomUnitary);
        let rng = SeededRng::new(21);
        let global = distributed_sketch(&a, partition, 5, scheme, rng).unwrap();
        let op = DistributedOperator::realize(32, &DistributedPlan::new(4, 5, scheme), rng, None)
            .unwrap();
        assert_eq!(global.sketch, op.apply(&a).unwrap());
        assert_eq!(global.local_rows, vec![5; 4]);
    }

    #[test]
    fn permutation_is_a_row_shuffle() {
        let a = sample_matrix(16, 2);
        let mut plan = DistributedPlan::new(2, 8, NodeScheme::Projected(ProjectionKind::Identity));
        plan.sampling = SamplingMode::InOrder;
        plan.permute = true;
        let op = DistributedOperator::realize(16, &plan, SeededRng::new(3), None).unwrap();
        let perm = op.permutation().unwrap().to_vec();
        assert_eq!(op.apply(&a).unwrap(), a.select_rows(&perm));
        let mut sorted = perm.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..16).collect::<Vec<_>>());
    }

    #[test]
    fn hadamard_projection_pads_non_powers_of_two() {
        let p = Projection::realize(ProjectionKind::HadamardSigned, 6, SeededRng::new(2)).unwrap();
        assert_eq!((p.input_rows(), p.output_rows()), (6, 8));
        let a = sample_matrix(6, 2);
        let pa = p.apply_full(&a).unwrap();
        assert!((pa.frobenius_norm() - a.frobenius_norm()).abs() < 1e-10);
    }
}
