//! Leverage scores, block decompositions and the flattening / balls-into-bins
//! diagnostics.

use std::io::Write;
use std::ops::Range;

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg::thin_orthonormalize;
use crate::matrix::Matrix;
use crate::rng::SeededRng;
use crate::sketch::LinearSketch;

/// Split of `N` rows into `k` contiguous blocks of `n = N/k` rows.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Partition {
    blocks: usize,
    block_rows: usize,
}

impl Partition {
    pub fn new(total_rows: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 {
            return Err(Error::InvalidArgument(
                "block count must be positive".into(),
            ));
        }
        if !total_rows.is_multiple_of(blocks) {
            return Err(Error::Indivisible {
                total: total_rows,
                parts: blocks,
            });
        }
        Ok(Self {
            blocks,
            block_rows: total_rows / blocks,
        })
    }

    /// Number of blocks `k`.
    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Rows per block `n`.
    pub fn block_rows(&self) -> usize {
        self.block_rows
    }

    pub fn total_rows(&self) -> usize {
        self.blocks * self.block_rows
    }

    pub fn range(&self, block: usize) -> Range<usize> {
        block * self.block_rows..(block + 1) * self.block_rows
    }

    pub fn ranges(&self) -> impl Iterator<Item = Range<usize>> + '_ {
        (0..self.blocks).map(|i| self.range(i))
    }

    pub fn block_of(&self, row: usize) -> usize {
        row / self.block_rows
    }
}

/// Leverage scores of a matrix together with their block statistics.
#[derive(Clone, Debug, PartialEq)]
pub struct LeverageProfile {
    scores: Vec<f64>,
    normalized: Vec<f64>,
    coherence: f64,
    block_sums: Vec<f64>,
    local_coherences: Vec<f64>,
    beta_hat: f64,
    rank: usize,
    partition: Partition,
}

impl LeverageProfile {
    /// Builds a profile from precomputed scores of a rank-`rank` matrix.
    pub fn from_scores(scores: Vec<f64>, rank: usize, partition: Partition) -> Result<Self> {
        if scores.len() != partition.total_rows() {
            return Err(Error::DimensionMismatch(format!(
                "{} scores for a partition of {} rows",
                scores.len(),
                partition.total_rows()
            )));
        }
        if rank == 0 {
            return Err(Error::InvalidArgument("rank must be positive".into()));
        }
        let normalized = scores.iter().map(|l| l / rank as f64).collect();
        let coherence = scores.iter().fold(0.0_f64, |m, &l| m.max(l));
        let block_sums: Vec<f64> = partition.ranges().map(|r| scores[r].iter().sum()).collect();
        let local_coherences = partition
            .ranges()
            .map(|r| scores[r].iter().fold(0.0_f64, |m, &l| m.max(l)))
            .collect();
        let min_block = block_sums.iter().fold(f64::INFINITY, |m, &s| m.min(s));
        let beta_hat = (partition.blocks() as f64 / rank as f64 * min_block).clamp(0.0, 1.0);
        Ok(Self {
            scores,
            normalized,
            coherence,
            block_sums,
            local_coherences,
            beta_hat,
            rank,
            partition,
        })
    }

    /// Leverage scores `ℓ_j`.
    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    /// Normalized scores `π_j = ℓ_j / d`.
    pub fn normalized(&self) -> &[f64] {
        &self.normalized
    }

    /// Coherence `γ = max_j ℓ_j`.
    pub fn coherence(&self) -> f64 {
        self.coherence
    }

    /// Block masses `𝓛_i`.
    pub fn block_sums(&self) -> &[f64] {
        &self.block_sums
    }

    /// Largest score within each block.
    pub fn local_coherences(&self) -> &[f64] {
        &self.local_coherences
    }

    /// Misestimation factor `β̂ = (k/d) · min_i 𝓛_i`.
    pub fn beta_hat(&self) -> f64 {
        self.beta_hat
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn partition(&self) -> Partition {
        self.partition
    }
}

/// Exact leverage scores of a full-column-rank `a` via thin QR.
pub fn leverage_profile(a: &Matrix, partition: Partition) -> Result<LeverageProfile> {
    if a.rows() != partition.total_rows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix has {} rows, partition covers {}",
            a.rows(),
            partition.total_rows()
        )));
    }
    let basis = thin_orthonormalize(a)?;
    LeverageProfile::from_scores(basis.row_norms_squared(), a.cols(), partition)
}

/// `β̂` of a profile; zero signals a block without leverage mass.
pub fn misestimation_beta(profile: &LeverageProfile) -> f64 {
    profile.beta_hat()
}

/// One data row of a [`FlatteningReport`].
#[derive(Clone, Debug, PartialEq)]
pub struct FlatteningRow {
    pub row: usize,
    pub block: usize,
    /// Normalized score of the row after block projection.
    pub score: f64,
    /// `𝓛_i / (n d)` of the row's block.
    pub target: f64,
    pub deviation: f64,
    pub within: bool,
}

/// How close block-projected normalized scores are to their block means.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatteningReport {
    pub xi: f64,
    pub rows: Vec<FlatteningRow>,
    pub block_targets: Vec<f64>,
    /// `ζ'_i = (𝓛_i / d) · √(ln(2/ξ) / 2)` per block.
    pub block_zeta: Vec<f64>,
    pub block_fractions: Vec<f64>,
    pub fraction_within: f64,
    pub pre_coherence: f64,
    pub post_coherence: f64,
    /// Block masses after projection (equal to the originals for unitary projections).
    pub post_block_sums: Vec<f64>,
}

impl FlatteningReport {
    pub fn max_deviation(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, r| m.max(r.deviation))
    }

    /// CSV with header `row,block,score,target,deviation,zeta,within`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "row,block,score,target,deviation,zeta,within")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.row,
                r.block,
                r.score,
                r.target,
                r.deviation,
                self.block_zeta[r.block],
                u8::from(r.within)
            )?;
        }
        Ok(())
    }
}

/// Compares the normalized scores of the block-projected matrix `P̂A` with the
/// block targets `𝓛_i/(nd)` of the original matrix.
pub fn flattening_report<P: LinearSketch>(
    a: &Matrix,
    partition: Partition,
    projections: &[P],
    xi: f64,
) -> Result<FlatteningReport> {
    if !(xi > 0.0 && xi < 1.0) {
        return Err(Error::OutOfRange {
            name: "xi",
            value: xi,
            range: "(0, 1)",
        });
    }
    let k = partition.blocks();
    let n = partition.block_rows();
    if projections.len() != k {
        return Err(Error::DimensionMismatch(format!(
            "{} projections for {k} blocks",
            projections.len()
        )));
    }
    if let Some(p) = projections
        .iter()
        .find(|p| p.input_dim() != n || p.output_dim() != n)
    {
        return Err(Error::DimensionMismatch(format!(
            "projection is {}x{}, blocks have {n} rows",
            p.output_dim(),
            p.input_dim()
        )));
    }
    let pre = leverage_profile(a, partition)?;
    let projected: Vec<Matrix> = partition
        .ranges()
        .zip(projections)
        .map(|(range, p)| p.apply(&a.row_range(range)))
        .collect::<Result<_>>()?;
    let stacked = Matrix::vstack(&projected.iter().collect::<Vec<_>>())?;
    let post = leverage_profile(&stacked, partition)?;

    let d = a.cols() as f64;
    let spread = ((2.0 / xi).ln() / 2.0).sqrt();
    let block_targets: Vec<f64> = pre
        .block_sums()
        .iter()
        .map(|s| s / (n as f64 * d))
        .collect();
    let block_zeta: Vec<f64> = pre.block_sums().iter().map(|s| s / d * spread).collect();
    let mut rows = Vec::with_capacity(a.rows());
    let mut inside = vec![0usize; k];
    for (j, &score) in post.normalized().iter().enumerate() {
        let block = partition.block_of(j);
        let deviation = (score - block_targets[block]).abs();
        let within = deviation <= block_zeta[block];
        inside[block] += usize::from(within);
        rows.push(FlatteningRow {
            row: j,
            block,
            score,
            target: block_targets[block],
            deviation,
            within,
        });
    }
    let total_inside: usize = inside.iter().sum();
    Ok(FlatteningReport {
        xi,
        rows,
        block_targets,
        block_zeta,
        block_fractions: inside.iter().map(|&c| c as f64 / n as f64).collect(),
        fraction_within: total_inside as f64 / a.rows() as f64,
        pre_coherence: pre.coherence(),
        post_coherence: post.coherence(),
        post_block_sums: post.block_sums().to_vec(),
    })
}

/// Deviation threshold of the balls-into-bins check.
pub const BINS_THRESHOLD: usize = 10;

/// Per-block sample counts when `R` rows are drawn uniformly with replacement.
#[derive(Clone, Debug, PartialEq)]
pub struct BinsReport {
    pub total_rows: usize,
    pub blocks: usize,
    pub samples: usize,
    /// Target count per block, `r = R / k`.
    pub target: usize,
    /// `counts[trial][block]`.
    pub counts: Vec<Vec<usize>>,
}

impl BinsReport {
    pub fn exceeds(&self, count: usize) -> bool {
        count.abs_diff(self.target) >= BINS_THRESHOLD
    }

    /// Fraction of (trial, block) pairs with `|#S_i − r| ≥ 10`.
    pub fn exceedance_frequency(&self) -> f64 {
        let hits = self
            .counts
            .iter()
            .flatten()
            .filter(|&&c| self.exceeds(c))
            .count();
        hits as f64 / (self.counts.len() * self.blocks) as f64
    }

    /// CSV with header `trial,block,count,target,exceeds`.
    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "trial,block,count,target,exceeds")?;
        for (t, counts) in self.counts.iter().enumerate() {
            for (i, &c) in counts.iter().enumerate() {
                writeln!(
                    out,
                    "{t},{i},{c},{},{}",
                    self.target,
                    u8::from(self.exceeds(c))
                )?;
            }
        }
        Ok(())
    }
}

/// Simulates `trials` rounds of `R` uniform draws over `N` rows split into `k` blocks.
pub fn bins_report(
    total_rows: usize,
    blocks: usize,
    samples: usize,
    trials: usize,
    rng: SeededRng,
) -> Result<BinsReport> {
    let partition = Partition::new(total_rows, blocks)?;
    if !samples.is_multiple_of(blocks) {
        return Err(Error::Indivisible {
            total: samples,
            parts: blocks,
        });
    }
    let counts = (0..trials)
        .map(|t| {
            let mut stream = rng.child(t as u64).stream();
            let mut c = vec![0usize; blocks];
            for _ in 0..samples {
                c[partition.block_of(stream.random_range(0..total_rows))] += 1;
            }
            c
        })
        .collect();
    Ok(BinsReport {
        total_rows,
        blocks,
        samples,
        target: samples / blocks,
        counts,
    })
}
