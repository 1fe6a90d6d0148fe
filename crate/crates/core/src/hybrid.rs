//! Hybrid sketching: a second sketch `Φ` applied by the coordinator to the
//! stacked local sketches, giving the composite `S̃ = Φ Ŝ`.
//!
//! Also holds the planners (ratios, network budgets, accuracy targets), the
//! sketch-size formulas and the Rademacher inner-product Gaussianity check.

use std::fmt;
use std::io::Write;

use rand::Rng;
use statrs::function::erf::erfc;

use crate::distributed::{DistributedOperator, DistributedPlan, NodeScheme};
use crate::error::{Error, Result};
use crate::leverage::{leverage_profile, Partition};
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::sketch::{LinearSketch, SketchKind, SketchOperator, DENSE_LIMIT};

/// Guards `floor` against products such as `0.29 * 100 = 28.999…`.
const FLOOR_SLACK: f64 = 1e-9;

/// Requested distortion and failure probability, with the per-stage values
/// `ε̃ = √(1+ε) − 1` and `δ̃ = δ/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Accuracy {
    pub epsilon: f64,
    pub delta: f64,
    pub epsilon_tilde: f64,
    pub delta_tilde: f64,
}

impl Accuracy {
    pub fn new(epsilon: f64, delta: f64) -> Result<Self> {
        let (epsilon_tilde, delta_tilde) = derive_tilde_params(epsilon, delta)?;
        Ok(Self {
            epsilon,
            delta,
            epsilon_tilde,
            delta_tilde,
        })
    }
}

/// Per-stage parameters `(ε̃, δ̃)` whose composition meets `(ε, δ)`.
pub fn derive_tilde_params(epsilon: f64, delta: f64) -> Result<(f64, f64)> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: epsilon,
            range: "(0, 1)",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            range: "(0, 1)",
        });
    }
    Ok(((1.0 + epsilon).sqrt() - 1.0, delta / 2.0))
}

/// Dimensions and sketch kinds of a two-stage hybrid sketch.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HybridPlan {
    pub total_rows: usize,
    pub cols: usize,
    pub blocks: usize,
    /// First-stage compression `μ`.
    pub mu: f64,
    /// Second-stage compression `ρ`.
    pub rho: f64,
    /// Overall compression `τ = ρ μ`.
    pub tau: f64,
    /// First-stage size `R`, a multiple of `k`.
    pub first_dim: usize,
    /// Final size `R̃`.
    pub second_dim: usize,
    pub local: NodeScheme,
    pub global: SketchKind,
    pub accuracy: Option<Accuracy>,
    /// Set when the accuracy planner had to cap `R` below `N`.
    pub capped: bool,
}

impl HybridPlan {
    /// `R = ⌊μN⌋` rounded down to a multiple of `k`, `R̃ = ⌊ρR⌋`.
    pub fn from_ratios(
        total_rows: usize,
        cols: usize,
        blocks: usize,
        mu: f64,
        rho: f64,
        local: NodeScheme,
        global: SketchKind,
    ) -> Result<Self> {
        for (name, value) in [("mu", mu), ("rho", rho)] {
            if !(value > 0.0 && value < 1.0) {
                return Err(Error::OutOfRange {
                    name,
                    value,
                    range: "(0, 1)",
                });
            }
        }
        if blocks == 0 {
            return Err(Error::InvalidArgument(
                "block count must be positive".into(),
            ));
        }
        let raw = (mu * total_rows as f64 + FLOOR_SLACK).floor() as usize;
        let first_dim = raw - raw % blocks;
        let second_dim = (rho * first_dim as f64 + FLOOR_SLACK).floor() as usize;
        let plan = Self {
            total_rows,
            cols,
            blocks,
            mu,
            rho,
            tau: mu * rho,
            first_dim,
            second_dim,
            local,
            global,
            accuracy: None,
            capped: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    /// A plan with explicit `R` and `R̃`.
    pub fn from_dims(
        total_rows: usize,
        cols: usize,
        blocks: usize,
        first_dim: usize,
        second_dim: usize,
        local: NodeScheme,
        global: SketchKind,
    ) -> Result<Self> {
        let mu = first_dim as f64 / total_rows as f64;
        let rho = second_dim as f64 / first_dim.max(1) as f64;
        let plan = Self {
            total_rows,
            cols,
            blocks,
            mu,
            rho,
            tau: mu * rho,
            first_dim,
            second_dim,
            local,
            global,
            accuracy: None,
            capped: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    fn validate(&self) -> Result<()> {
        let (n, k) = (self.total_rows, self.blocks);
        if k == 0 || n % k != 0 {
            return Err(Error::Indivisible { total: n, parts: k });
        }
        if self.first_dim < k || !self.first_dim.is_multiple_of(k) {
            return Err(Error::PlanInfeasible(format!(
                "first-stage size {} is not a positive multiple of k = {k}",
                self.first_dim
            )));
        }
        if self.first_dim >= n {
            return Err(Error::PlanInfeasible(format!(
                "first stage is not compressive (R = {} ≥ N = {n})",
                self.first_dim
            )));
        }
        if self.second_dim >= self.first_dim {
            return Err(Error::PlanInfeasible(format!(
                "second stage is not compressive (R̃ = {} ≥ R = {})",
                self.second_dim, self.first_dim
            )));
        }
        if self.second_dim <= self.cols {
            return Err(Error::PlanInfeasible(format!(
                "final size R̃ = {} does not exceed d = {}",
                self.second_dim, self.cols
            )));
        }
        Ok(())
    }

    /// Rows kept per node, `r = R / k`.
    pub fn samples_per_node(&self) -> usize {
        self.first_dim / self.blocks
    }

    pub fn block_rows(&self) -> usize {
        self.total_rows / self.blocks
    }

    pub fn with_kinds(mut self, local: NodeScheme, global: SketchKind) -> Self {
        self.local = local;
        self.global = global;
        self
    }

    /// `key=value` lines describing the plan.
    pub fn write_key_values(&self, mut out: impl Write) -> Result<()> {
        let lines = [
            ("N", self.total_rows.to_string()),
            ("d", self.cols.to_string()),
            ("k", self.blocks.to_string()),
            ("n", self.block_rows().to_string()),
            ("mu", self.mu.to_string()),
            ("rho", self.rho.to_string()),
            ("tau", self.tau.to_string()),
            ("R", self.first_dim.to_string()),
            ("r", self.samples_per_node().to_string()),
            ("R_tilde", self.second_dim.to_string()),
            ("local", self.local.to_string()),
            ("global", self.global.to_string()),
            ("capped", self.capped.to_string()),
        ];
        for (key, value) in lines {
            writeln!(out, "{key}={value}")?;
        }
        if let Some(acc) = self.accuracy {
            writeln!(out, "epsilon={}", acc.epsilon)?;
            writeln!(out, "delta={}", acc.delta)?;
            writeln!(out, "epsilon_tilde={}", acc.epsilon_tilde)?;
            writeln!(out, "delta_tilde={}", acc.delta_tilde)?;
        }
        Ok(())
    }
}

/// Communication and storage limits, in transmitted or stored reals.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NetworkBudget {
    /// Per-node uplink `C1`.
    pub uplink: u64,
    /// Coordinator storage `C2`.
    pub storage: u64,
    /// Size of the final sketch `C3`.
    pub final_size: u64,
}

impl NetworkBudget {
    pub fn new(uplink: u64, storage: u64, final_size: u64) -> Result<Self> {
        if uplink == 0 || storage == 0 || final_size == 0 {
            return Err(Error::InvalidArgument("budgets must be positive".into()));
        }
        Ok(Self {
            uplink,
            storage,
            final_size,
        })
    }
}

/// Largest plan meeting the budget: `μ = min{C1/(nd), C2/(knd)}`,
/// `R = ⌊μN⌋` rounded down to a multiple of `k`, `ρ = C3/(Rd)`, `R̃ = ⌊ρR⌋`.
///
/// Uses local SRHT and global Rademacher sketches.
pub fn plan_from_budget(
    total_rows: usize,
    cols: usize,
    blocks: usize,
    budget: NetworkBudget,
) -> Result<HybridPlan> {
    if blocks == 0 || !total_rows.is_multiple_of(blocks) {
        return Err(Error::Indivisible {
            total: total_rows,
            parts: blocks,
        });
    }
    if cols == 0 {
        return Err(Error::InvalidArgument("d must be positive".into()));
    }
    let (k, d) = (blocks as u128, cols as u128);
    let n = total_rows as u128 / k;
    let uplink_rows = budget.uplink as u128 * k;
    let storage_rows = budget.storage as u128;
    // μN = min{C1 k, C2} / d, computed exactly.
    let raw = uplink_rows.min(storage_rows) / d;
    if raw >= total_rows as u128 {
        return Err(Error::PlanInfeasible(
            "uplink and storage budgets allow the full data (μ ≥ 1); nothing to compress".into(),
        ));
    }
    let first_dim = raw - raw % k;
    if first_dim == 0 {
        return Err(Error::PlanInfeasible(format!(
            "budgets leave fewer than k = {blocks} first-stage rows"
        )));
    }
    let final_budget = budget.final_size as u128;
    if final_budget >= first_dim * d {
        return Err(Error::PlanInfeasible(
            "final-size budget C3 allows the whole first-stage sketch (ρ ≥ 1)".into(),
        ));
    }
    let second_dim = final_budget / d;
    if second_dim <= d {
        return Err(Error::PlanInfeasible(format!(
            "final-size budget leaves R̃ = {second_dim} ≤ d = {cols}"
        )));
    }
    let mu =
        (budget.uplink as f64 / (n * d) as f64).min(budget.storage as f64 / (k * n * d) as f64);
    let rho = budget.final_size as f64 / (first_dim * d) as f64;
    let plan = HybridPlan {
        total_rows,
        cols,
        blocks,
        mu,
        rho,
        tau: mu * rho,
        first_dim: first_dim as usize,
        second_dim: second_dim as usize,
        local: NodeScheme::Sketch(SketchKind::Srht),
        global: SketchKind::Rademacher,
        accuracy: None,
        capped: false,
    };
    plan.validate()?;
    Ok(plan)
}

/// Which sketch-size formula to evaluate. All hidden constants are 1 except
/// the explicit factor 3 of the sparse-SRHT bound.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DimensionFormula {
    /// Single-stage bound of a sketch kind.
    Sketch(SketchKind),
    /// Block-diagonal SRHT bound
    /// `(3k/ε²)(√d + √(8 ln(3n/(kδ))))² ln(3d/δ)`.
    SparseSrht,
    /// Distributed leverage bound `d ln(2d/δ) / (β̂ ε²)`.
    DistributedLeverage,
}

impl fmt::Display for DimensionFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DimensionFormula::Sketch(SketchKind::Gaussian | SketchKind::Rademacher) => {
                "(d + ln(1/delta)) / eps^2"
            }
            DimensionFormula::Sketch(SketchKind::Srht) => "d ln(N d/delta) ln(d/delta) / eps^2",
            DimensionFormula::Sketch(SketchKind::UniformSampling) => "N gamma ln(1/delta) / eps^2",
            DimensionFormula::Sketch(SketchKind::LeverageScore) => "d ln(2d/delta) / (beta eps^2)",
            DimensionFormula::Sketch(SketchKind::Sjlt) => "d^2 / (delta eps^2)",
            DimensionFormula::SparseSrht => {
                "(3k/eps^2) (sqrt(d) + sqrt(8 ln(3n/(k delta))))^2 ln(3d/delta)"
            }
            DimensionFormula::DistributedLeverage => "d ln(2d/delta) / (beta_hat eps^2)",
        })
    }
}

/// Inputs of a sketch-size formula.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionQuery {
    pub total_rows: usize,
    pub cols: usize,
    pub epsilon: f64,
    pub delta: f64,
    pub blocks: Option<usize>,
    /// Misestimation factor (`β` or `β̂`).
    pub beta: Option<f64>,
    /// Coherence `γ`, for uniform sampling.
    pub coherence: Option<f64>,
}

impl DimensionQuery {
    pub fn new(total_rows: usize, cols: usize, epsilon: f64, delta: f64) -> Self {
        Self {
            total_rows,
            cols,
            epsilon,
            delta,
            blocks: None,
            beta: None,
            coherence: None,
        }
    }

    pub fn with_blocks(mut self, blocks: usize) -> Self {
        self.blocks = Some(blocks);
        self
    }

    pub fn with_beta(mut self, beta: f64) -> Self {
        self.beta = Some(beta);
        self
    }

    pub fn with_coherence(mut self, coherence: f64) -> Self {
        self.coherence = Some(coherence);
        self
    }
}

/// A required sketch size.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DimensionEstimate {
    pub formula: DimensionFormula,
    /// Unrounded formula value.
    pub exact: f64,
    /// `⌈exact⌉`.
    pub rows: usize,
    /// Whether the size reaches the input dimension `N`.
    pub infeasible: bool,
}

/// Evaluates a sketch-size formula.
pub fn required_dimension(
    formula: DimensionFormula,
    query: &DimensionQuery,
) -> Result<DimensionEstimate> {
    let (eps, delta) = (query.epsilon, query.delta);
    if !(eps > 0.0 && eps < 1.0) {
        return Err(Error::OutOfRange {
            name: "epsilon",
            value: eps,
            range: "(0, 1)",
        });
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::OutOfRange {
            name: "delta",
            value: delta,
            range: "(0, 1)",
        });
    }
    let d = query.cols as f64;
    let big_n = query.total_rows as f64;
    let eps2 = eps * eps;
    let beta = |q: &DimensionQuery| -> Result<f64> {
        let b = q.beta.ok_or(Error::MissingParam("beta"))?;
        if b <= 0.0 {
            return Err(Error::DegenerateBlock);
        }
        if b > 1.0 {
            return Err(Error::OutOfRange {
                name: "beta",
                value: b,
                range: "(0, 1]",
            });
        }
        Ok(b)
    };
    let exact = match formula {
        DimensionFormula::Sketch(SketchKind::Gaussian | SketchKind::Rademacher) => {
            (d + (1.0 / delta).ln()) / eps2
        }
        DimensionFormula::Sketch(SketchKind::Srht) => {
            d * (big_n * d / delta).ln() * (d / delta).ln() / eps2
        }
        DimensionFormula::Sketch(SketchKind::UniformSampling) => {
            let gamma = query.coherence.ok_or(Error::MissingParam("coherence"))?;
            big_n * gamma * (1.0 / delta).ln() / eps2
        }
        DimensionFormula::Sketch(SketchKind::LeverageScore)
        | DimensionFormula::DistributedLeverage => {
            d * (2.0 * d / delta).ln() / (beta(query)? * eps2)
        }
        DimensionFormula::Sketch(SketchKind::Sjlt) => d * d / (delta * eps2),
        DimensionFormula::SparseSrht => {
            let k = query.blocks.ok_or(Error::MissingParam("blocks"))?;
            if k == 0 || !query.total_rows.is_multiple_of(k) {
                return Err(Error::Indivisible {
                    total: query.total_rows,
                    parts: k,
                });
            }
            let kf = k as f64;
            let n = big_n / kf;
            let spread = d.sqrt() + (8.0 * (3.0 * n / (kf * delta)).ln()).sqrt();
            3.0 * kf / eps2 * spread * spread * (3.0 * d / delta).ln()
        }
    };
    let rows = exact.ceil() as usize;
    Ok(DimensionEstimate {
        formula,
        exact,
        rows,
        infeasible: rows >= query.total_rows,
    })
}

/// Smallest plan whose formula sizes meet `(ε, δ)` split as `(ε̃, δ̃)` per stage.
///
/// `R` comes from `first` rounded up to a multiple of `k`; if that reaches `N`
/// it is capped at `N − k` and the plan is flagged `capped`. `R̃` comes from the
/// global kind's single-stage formula with input dimension `R`.
#[allow(clippy::too_many_arguments)]
pub fn plan_for_accuracy(
    total_rows: usize,
    cols: usize,
    blocks: usize,
    epsilon: f64,
    delta: f64,
    local: NodeScheme,
    global: SketchKind,
    first: DimensionFormula,
) -> Result<HybridPlan> {
    let accuracy = Accuracy::new(epsilon, delta)?;
    if blocks == 0 || !total_rows.is_multiple_of(blocks) {
        return Err(Error::Indivisible {
            total: total_rows,
            parts: blocks,
        });
    }
    let query = DimensionQuery::new(
        total_rows,
        cols,
        accuracy.epsilon_tilde,
        accuracy.delta_tilde,
    )
    .with_blocks(blocks);
    let first_estimate = required_dimension(first, &query)?;
    let mut first_dim = first_estimate.rows.div_ceil(blocks) * blocks;
    let capped = first_dim >= total_rows;
    if capped {
        first_dim = total_rows - blocks;
        log::warn!(
            "first-stage formula asks for {} rows out of N = {total_rows}; capping at {first_dim}",
            first_estimate.rows
        );
    }
    let second_query = DimensionQuery {
        total_rows: first_dim,
        ..query
    };
    let second_dim = required_dimension(DimensionFormula::Sketch(global), &second_query)?.rows;
    let mut plan = HybridPlan::from_dims(
        total_rows, cols, blocks, first_dim, second_dim, local, global,
    )?;
    plan.accuracy = Some(accuracy);
    plan.capped = capped;
    Ok(plan)
}

/// Realized two-stage operator `S̃ = Φ Ŝ`.
#[derive(Clone, Debug)]
pub struct HybridOperator {
    first: DistributedOperator,
    second: SketchOperator,
}

impl HybridOperator {
    /// Realizes the local stage from `rng.child(0)` and `Φ` from `rng.child(1)`.
    ///
    /// `data` is needed only when a stage samples by leverage scores.
    pub fn realize(plan: &HybridPlan, rng: SeededRng, data: Option<&Matrix>) -> Result<Self> {
        let local = DistributedPlan::new(plan.blocks, plan.samples_per_node(), plan.local);
        let first = DistributedOperator::realize(plan.total_rows, &local, rng.child(0), data)?;
        let profile = if plan.global.needs_profile() {
            let a = data.ok_or(Error::MissingAux)?;
            let stacked = first.apply(a)?;
            Some(leverage_profile(
                &stacked,
                Partition::new(stacked.rows(), 1)?,
            )?)
        } else {
            None
        };
        let second = SketchOperator::realize(
            plan.global,
            plan.first_dim,
            plan.second_dim,
            rng.child(1),
            profile.as_ref(),
        )?;
        Ok(Self { first, second })
    }

    pub fn from_parts(first: DistributedOperator, second: SketchOperator) -> Result<Self> {
        if first.output_dim() != second.in_dim() {
            return Err(Error::DimensionMismatch(format!(
                "first stage yields {} rows, second stage expects {}",
                first.output_dim(),
                second.in_dim()
            )));
        }
        Ok(Self { first, second })
    }

    pub fn first_stage(&self) -> &DistributedOperator {
        &self.first
    }

    pub fn second_stage(&self) -> &SketchOperator {
        &self.second
    }
}

impl LinearSketch for HybridOperator {
    fn input_dim(&self) -> usize {
        self.first.input_dim()
    }

    fn output_dim(&self) -> usize {
        self.second.out_dim()
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        self.second.apply(&self.first.apply(a)?)
    }

    fn to_dense(&self) -> Result<Matrix> {
        let n = self.input_dim();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                in_dim: n,
                limit: DENSE_LIMIT,
            });
        }
        self.second.as_dense()?.matmul(&self.first.to_dense()?)
    }
}

/// `Ã = Φ Â` for the plan, with `Â` from the distributed first stage.
pub fn hybrid_sketch(a: &Matrix, plan: &HybridPlan, rng: SeededRng) -> Result<Matrix> {
    if a.rows() != plan.total_rows || a.cols() != plan.cols {
        return Err(Error::DimensionMismatch(format!(
            "plan is for {}x{}, matrix is {}x{}",
            plan.total_rows,
            plan.cols,
            a.rows(),
            a.cols()
        )));
    }
    HybridOperator::realize(plan, rng, Some(a))?.apply(a)
}

/// Dense composite `S̃ = [Φ¹S_1 ⋯ ΦᵏS_k]` (`N ≤ 4096`).
pub fn composite_operator(
    plan: &HybridPlan,
    rng: SeededRng,
    data: Option<&Matrix>,
) -> Result<Matrix> {
    if plan.total_rows > DENSE_LIMIT {
        return Err(Error::TooLarge {
            in_dim: plan.total_rows,
            limit: DENSE_LIMIT,
        });
    }
    HybridOperator::realize(plan, rng, data)?.to_dense()
}

/// Distance between the empirical law of `⟨y, z⟩/√ν` for independent
/// Rademacher `y, z ∈ {±1}^ν` and the standard normal.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianityReport {
    pub nu: usize,
    pub samples: usize,
    /// `sup_x |F̂(x) − Φ(x)|`.
    pub statistic: f64,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

pub fn gaussianity_report(nu: usize, samples: usize, rng: SeededRng) -> Result<GaussianityReport> {
    if nu == 0 {
        return Err(Error::InvalidArgument("nu must be positive".into()));
    }
    if samples < 1000 {
        return Err(Error::OutOfRange {
            name: "samples",
            value: samples as f64,
            range: "[1000, ∞)",
        });
    }
    let words = nu.div_ceil(64);
    let tail_mask = if nu.is_multiple_of(64) {
        u64::MAX
    } else {
        (1u64 << (nu % 64)) - 1
    };
    // disagreements[c] counts samples where y and z differ in c coordinates.
    let mut disagreements = vec![0usize; nu + 1];
    let mut stream = rng.stream();
    for _ in 0..samples {
        let mut differ = 0u32;
        for w in 0..words {
            let mask = if w + 1 == words { tail_mask } else { u64::MAX };
            let y: u64 = stream.random();
            let z: u64 = stream.random();
            differ += ((y ^ z) & mask).count_ones();
        }
        disagreements[differ as usize] += 1;
    }
    let scale = (nu as f64).sqrt();
    let total = samples as f64;
    let mut below = 0usize;
    let mut statistic: f64 = 0.0;
    // ⟨y,z⟩ = ν − 2c increases as c decreases.
    for c in (0..=nu).rev() {
        let count = disagreements[c];
        if count == 0 {
            continue;
        }
        let x = (nu as f64 - 2.0 * c as f64) / scale;
        let cdf = normal_cdf(x);
        let left = below as f64 / total;
        below += count;
        let right = below as f64 / total;
        statistic = statistic.max((left - cdf).abs()).max((right - cdf).abs());
    }
    Ok(GaussianityReport {
        nu,
        samples,
        statistic,
    })
}
