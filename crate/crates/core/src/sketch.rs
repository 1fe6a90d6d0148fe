//! Single-stage sketching operators.
//!
//! Every operator is realized once from `(kind, dimensions, seed)` and then
//! applied to any number of matrices. Realization is a pure function of its
//! inputs, so re-realizing with the same seed reproduces the operator exactly.

use std::fmt;
use std::str::FromStr;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::hadamard::{fwht_rows_in_place, hadamard_entry, pad_to_power_of_two};
use crate::leverage::LeverageProfile;
use crate::matrix::{axpy, Matrix};
use crate::rng::SeededRng;

/// Largest input dimension for which dense materialization is allowed.
pub const DENSE_LIMIT: usize = 4096;

/// Dense Gaussian/Rademacher realizations up to this many entries are stored;
/// larger ones regenerate their rows from per-row seeds on every application.
pub const STORED_ENTRY_LIMIT: usize = 1 << 24;

/// A linear map `ℝ^N → ℝ^R` acting on the rows of a matrix.
pub trait LinearSketch {
    fn input_dim(&self) -> usize;
    fn output_dim(&self) -> usize;
    /// Computes `S · A`.
    fn apply(&self, a: &Matrix) -> Result<Matrix>;

    /// Materializes `S` as an `R x N` matrix (test oracle; `N ≤ DENSE_LIMIT`).
    fn to_dense(&self) -> Result<Matrix> {
        let n = self.input_dim();
        if n > DENSE_LIMIT {
            return Err(Error::TooLarge {
                in_dim: n,
                limit: DENSE_LIMIT,
            });
        }
        self.apply(&Matrix::identity(n))
    }
}

impl LinearSketch for Matrix {
    fn input_dim(&self) -> usize {
        self.cols()
    }

    fn output_dim(&self) -> usize {
        self.rows()
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        self.matmul(a)
    }
}

impl<T: LinearSketch + ?Sized> LinearSketch for &T {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        (**self).apply(a)
    }

    fn to_dense(&self) -> Result<Matrix> {
        (**self).to_dense()
    }
}

/// The sketch families available to every pipeline.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SketchKind {
    Gaussian,
    Rademacher,
    Srht,
    UniformSampling,
    LeverageScore,
    Sjlt,
}

impl SketchKind {
    pub const ALL: [SketchKind; 6] = [
        SketchKind::Gaussian,
        SketchKind::Rademacher,
        SketchKind::Srht,
        SketchKind::UniformSampling,
        SketchKind::LeverageScore,
        SketchKind::Sjlt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SketchKind::Gaussian => "gaussian",
            SketchKind::Rademacher => "rademacher",
            SketchKind::Srht => "srht",
            SketchKind::UniformSampling => "uniform",
            SketchKind::LeverageScore => "leverage",
            SketchKind::Sjlt => "sjlt",
        }
    }

    /// Whether realization needs a leverage profile of the data.
    pub fn needs_profile(self) -> bool {
        self == SketchKind::LeverageScore
    }
}

impl fmt::Display for SketchKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SketchKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" => Ok(SketchKind::Gaussian),
            "rademacher" => Ok(SketchKind::Rademacher),
            "srht" => Ok(SketchKind::Srht),
            "uniform" | "uniform-sampling" => Ok(SketchKind::UniformSampling),
            "leverage" | "leverage-score" => Ok(SketchKind::LeverageScore),
            "sjlt" => Ok(SketchKind::Sjlt),
            other => Err(Error::InvalidArgument(format!(
                "unknown sketch kind `{other}`"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
enum Realization {
    Dense(Matrix),
    Streamed {
        rng: SeededRng,
        rademacher: bool,
    },
    Srht {
        padded: usize,
        signs: Vec<f64>,
        rows: Vec<usize>,
    },
    Sampling {
        indices: Vec<usize>,
        weights: Vec<f64>,
    },
    Sjlt {
        buckets: Vec<usize>,
        signs: Vec<f64>,
    },
}

/// A realized random sketch `S ∈ ℝ^{R x N}`.
#[derive(Clone, Debug)]
pub struct SketchOperator {
    kind: SketchKind,
    in_dim: usize,
    out_dim: usize,
    seed: u64,
    realization: Realization,
}

impl SketchOperator {
    /// Draws an operator of the given kind.
    ///
    /// `profile` is required for [`SketchKind::LeverageScore`] and ignored otherwise.
    pub fn realize(
        kind: SketchKind,
        in_dim: usize,
        out_dim: usize,
        rng: SeededRng,
        profile: Option<&LeverageProfile>,
    ) -> Result<Self> {
        if out_dim >= in_dim {
            return Err(Error::DimensionOrder { in_dim, out_dim });
        }
        if out_dim == 0 {
            return Err(Error::InvalidArgument(
                "sketch size must be positive".into(),
            ));
        }
        let realization = match kind {
            SketchKind::Gaussian | SketchKind::Rademacher => {
                let rademacher = kind == SketchKind::Rademacher;
                if out_dim * in_dim <= STORED_ENTRY_LIMIT {
                    let mut m = Matrix::zeros(out_dim, in_dim);
                    for i in 0..out_dim {
                        fill_dense_row(rng, i, rademacher, out_dim, m.row_mut(i));
                    }
                    Realization::Dense(m)
                } else {
                    Realization::Streamed { rng, rademacher }
                }
            }
            SketchKind::Srht => {
                let padded = in_dim.next_power_of_two();
                let mut sign_stream = rng.child(0).stream();
                let signs = (0..padded).map(|_| random_sign(&mut sign_stream)).collect();
                let mut row_stream = rng.child(1).stream();
                let rows = (0..out_dim)
                    .map(|_| row_stream.random_range(0..padded))
                    .collect();
                Realization::Srht {
                    padded,
                    signs,
                    rows,
                }
            }
            SketchKind::UniformSampling => {
                let mut stream = rng.child(1).stream();
                let indices = (0..out_dim)
                    .map(|_| stream.random_range(0..in_dim))
                    .collect();
                let weight = (in_dim as f64 / out_dim as f64).sqrt();
                Realization::Sampling {
                    indices,
                    weights: vec![weight; out_dim],
                }
            }
            SketchKind::LeverageScore => {
                let profile = profile.ok_or(Error::MissingAux)?;
                let probs = profile.normalized();
                if probs.len() != in_dim {
                    return Err(Error::DimensionMismatch(format!(
                        "profile covers {} rows, sketch input has {in_dim}",
                        probs.len()
                    )));
                }
                // Zero-score rows lie outside the column space and are never drawn.
                if let Some(j) = probs.iter().position(|&p| !(p >= 0.0)) {
                    return Err(Error::InvalidArgument(format!(
                        "leverage sampling needs non-negative scores; row {j} has {}",
                        probs[j]
                    )));
                }
                let dist =
                    WeightedIndex::new(probs).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                let mut stream = rng.child(1).stream();
                let indices: Vec<usize> = (0..out_dim).map(|_| dist.sample(&mut stream)).collect();
                let weights = indices
                    .iter()
                    .map(|&j| 1.0 / (out_dim as f64 * probs[j]).sqrt())
                    .collect();
                Realization::Sampling { indices, weights }
            }
            SketchKind::Sjlt => {
                let mut stream = rng.child(0).stream();
                let mut buckets = Vec::with_capacity(in_dim);
                let mut signs = Vec::with_capacity(in_dim);
                for _ in 0..in_dim {
                    buckets.push(stream.random_range(0..out_dim));
                    signs.push(random_sign(&mut stream));
                }
                Realization::Sjlt { buckets, signs }
            }
        };
        Ok(Self {
            kind,
            in_dim,
            out_dim,
            seed: rng.seed(),
            realization,
        })
    }

    /// The identity map on `ℝ^n`, expressed as an in-order sampler with unit weights.
    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `scale · I_n` as an in-order sampler.
    pub fn scaled_identity(n: usize, scale: f64) -> Self {
        Self {
            kind: SketchKind::UniformSampling,
            in_dim: n,
            out_dim: n,
            seed: 0,
            realization: Realization::Sampling {
                indices: (0..n).collect(),
                weights: vec![scale; n],
            },
        }
    }

    /// A sampler with explicit indices and weights.
    pub fn sampler(in_dim: usize, indices: Vec<usize>, weights: Vec<f64>) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::DimensionMismatch(
                "one weight per sampled index is required".into(),
            ));
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= in_dim) {
            return Err(Error::InvalidArgument(format!(
                "sampled index {bad} outside 0..{in_dim}"
            )));
        }
        if weights.iter().any(|w| !(*w > 0.0)) {
            return Err(Error::InvalidArgument(
                "sampling weights must be positive".into(),
            ));
        }
        Ok(Self {
            kind: SketchKind::UniformSampling,
            in_dim,
            out_dim: indices.len(),
            seed: 0,
            realization: Realization::Sampling { indices, weights },
        })
    }

    /// An SRHT with explicit sign diagonal (over the padded dimension) and sampled rows.
    pub fn srht_from_parts(in_dim: usize, signs: Vec<f64>, rows: Vec<usize>) -> Result<Self> {
        let padded = in_dim.next_power_of_two();
        if signs.len() != padded || signs.iter().any(|s| s.abs() != 1.0) {
            return Err(Error::InvalidArgument(format!(
                "SRHT needs {padded} signs in {{-1, +1}}"
            )));
        }
        if rows.is_empty() || rows.iter().any(|&r| r >= padded) {
            return Err(Error::InvalidArgument(format!(
                "SRHT rows must be non-empty and lie in 0..{padded}"
            )));
        }
        Ok(Self {
            kind: SketchKind::Srht,
            in_dim,
            out_dim: rows.len(),
            seed: 0,
            realization: Realization::Srht {
                padded,
                signs,
                rows,
            },
        })
    }

    pub fn kind(&self) -> SketchKind {
        self.kind
    }

    pub fn in_dim(&self) -> usize {
        self.in_dim
    }

    pub fn out_dim(&self) -> usize {
        self.out_dim
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Sampled row indices of sampling and SRHT realizations.
    pub fn sample_indices(&self) -> Option<&[usize]> {
        match &self.realization {
            Realization::Sampling { indices, .. } => Some(indices),
            Realization::Srht { rows, .. } => Some(rows),
            _ => None,
        }
    }

    /// Per-row rescale weights of sampling realizations.
    pub fn sample_weights(&self) -> Option<&[f64]> {
        match &self.realization {
            Realization::Sampling { weights, .. } => Some(weights),
            _ => None,
        }
    }

    /// Padded dimension and sign diagonal of an SRHT realization.
    pub fn srht_signs(&self) -> Option<(usize, &[f64])> {
        match &self.realization {
            Realization::Srht { padded, signs, .. } => Some((*padded, signs)),
            _ => None,
        }
    }

    /// Whether a dense realization is held in memory rather than regenerated.
    pub fn is_stored(&self) -> bool {
        !matches!(self.realization, Realization::Streamed { .. })
    }

    /// `S · A`.
    pub fn apply(&self, a: &Matrix) -> Result<Matrix> {
        if a.rows() != self.in_dim {
            return Err(Error::DimensionMismatch(format!(
                "sketch expects {} rows, matrix has {}",
                self.in_dim,
                a.rows()
            )));
        }
        let cols = a.cols();
        match &self.realization {
            Realization::Dense(m) => m.matmul(a),
            Realization::Streamed { rng, rademacher } => {
                let mut out = Matrix::zeros(self.out_dim, cols);
                if cols == 0 {
                    return Ok(out);
                }
                out.data_mut()
                    .par_chunks_mut(cols)
                    .enumerate()
                    .for_each(|(i, out_row)| {
                        let mut row = vec![0.0; self.in_dim];
                        fill_dense_row(*rng, i, *rademacher, self.out_dim, &mut row);
                        for (j, &s) in row.iter().enumerate() {
                            axpy(out_row, s, a.row(j));
                        }
                    });
                Ok(out)
            }
            Realization::Srht { signs, rows, .. } => {
                let (mut padded, _) = pad_to_power_of_two(a);
                for (i, s) in signs.iter().enumerate().take(self.in_dim) {
                    padded.row_mut(i).iter_mut().for_each(|v| *v *= s);
                }
                fwht_rows_in_place(&mut padded)?;
                let mut out = padded.select_rows(rows);
                out.scale_in_place(1.0 / (self.out_dim as f64).sqrt());
                Ok(out)
            }
            Realization::Sampling { indices, weights } => {
                let mut out = a.select_rows(indices);
                for (i, w) in weights.iter().enumerate() {
                    out.row_mut(i).iter_mut().for_each(|v| *v *= w);
                }
                Ok(out)
            }
            Realization::Sjlt { buckets, signs } => {
                let mut out = Matrix::zeros(self.out_dim, cols);
                for (j, (&bucket, &sign)) in buckets.iter().zip(signs).enumerate() {
                    axpy(out.row_mut(bucket), sign, a.row(j));
                }
                Ok(out)
            }
        }
    }

    /// Materializes `S` as a dense `R x N` matrix, built directly from the realization.
    pub fn as_dense(&self) -> Result<Matrix> {
        if self.in_dim > DENSE_LIMIT {
            return Err(Error::TooLarge {
                in_dim: self.in_dim,
                limit: DENSE_LIMIT,
            });
        }
        let (r, n) = (self.out_dim, self.in_dim);
        let dense = match &self.realization {
            Realization::Dense(m) => m.clone(),
            Realization::Streamed { rng, rademacher } => {
                let mut m = Matrix::zeros(r, n);
                for i in 0..r {
                    fill_dense_row(*rng, i, *rademacher, r, m.row_mut(i));
                }
                m
            }
            Realization::Srht { signs, rows, .. } => {
                let scale = 1.0 / (r as f64).sqrt();
                Matrix::from_fn(r, n, |i, j| scale * hadamard_entry(rows[i], j) * signs[j])
            }
            Realization::Sampling { indices, weights } => {
                let mut m = Matrix::zeros(r, n);
                for (i, (&j, &w)) in indices.iter().zip(weights).enumerate() {
                    m.set(i, j, w);
                }
                m
            }
            Realization::Sjlt { buckets, signs } => {
                let mut m = Matrix::zeros(r, n);
                for (j, (&b, &s)) in buckets.iter().zip(signs).enumerate() {
                    m.set(b, j, s);
                }
                m
            }
        };
        Ok(dense)
    }
}

impl LinearSketch for SketchOperator {
    fn input_dim(&self) -> usize {
        self.in_dim
    }

    fn output_dim(&self) -> usize {
        self.out_dim
    }

    fn apply(&self, a: &Matrix) -> Result<Matrix> {
        SketchOperator::apply(self, a)
    }

    fn to_dense(&self) -> Result<Matrix> {
        self.as_dense()
    }
}

fn random_sign(rng: &mut impl Rng) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Row `row` of a dense Gaussian or Rademacher sketch with `out_dim` rows.
fn fill_dense_row(rng: SeededRng, row: usize, rademacher: bool, out_dim: usize, out: &mut [f64]) {
    let scale = 1.0 / (out_dim as f64).sqrt();
    let mut stream = rng.child(row as u64).stream();
    if rademacher {
        for chunk in out.chunks_mut(64) {
            let bits: u64 = stream.random();
            for (b, v) in chunk.iter_mut().enumerate() {
                *v = if bits >> b & 1 == 1 { scale } else { -scale };
            }
        }
    } else {
        for v in out.iter_mut() {
            let g: f64 = stream.sample(StandardNormal);
            *v = scale * g;
        }
    }
}

/// Monte-Carlo mean of `SᵀS` over `trials` realizations of `kind`.
pub fn empirical_isotropy(
    kind: SketchKind,
    in_dim: usize,
    out_dim: usize,
    trials: usize,
    rng: SeededRng,
    profile: Option<&LeverageProfile>,
) -> Result<Matrix> {
    mean_gram(in_dim, trials, |t| {
        SketchOperator::realize(kind, in_dim, out_dim, rng.child(t as u64), profile)?.as_dense()
    })
}

/// Mean of `SᵀS` over `trials` dense draws `draw(t)` of `N`-column operators.
pub fn mean_gram(
    in_dim: usize,
    trials: usize,
    draw: impl Fn(usize) -> Result<Matrix>,
) -> Result<Matrix> {
    if trials == 0 {
        return Err(Error::InvalidArgument(
            "at least one trial is required".into(),
        ));
    }
    let mut acc = Matrix::zeros(in_dim, in_dim);
    for t in 0..trials {
        let s = draw(t)?;
        if s.cols() != in_dim {
            return Err(Error::DimensionMismatch(format!(
                "draw has {} columns, expected {in_dim}",
                s.cols()
            )));
        }
        acc.add_assign(&s.gram())?;
    }
    acc.scale_in_place(1.0 / trials as f64);
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leverage::{LeverageProfile, Partition};

    fn profile(scores: Vec<f64>, d: usize) -> LeverageProfile {
        let n = scores.len();
        LeverageProfile::from_scores(scores, d, Partition::new(n, 1).unwrap()).unwrap()
    }

    #[test]
    fn kind_names_round_trip() {
        for kind in SketchKind::ALL {
            assert_eq!(kind.name().parse::<SketchKind>().unwrap(), kind);
        }
        assert!("countsketch".parse::<SketchKind>().is_err());
    }

    #[test]
    fn uniform_sampler_shape_and_rescale() {
        let op =
            SketchOperator::realize(SketchKind::UniformSampling, 4, 2, SeededRng::new(1), None)
                .unwrap();
        assert_eq!(op.sample_indices().unwrap().len(), 2);
        assert!(op.sample_indices().unwrap().iter().all(|&i| i < 4));
        for w in op.sample_weights().unwrap() {
            assert_eq!(*w, 2f64.sqrt());
        }
    }

    #[test]
    fn srht_padding_arithmetic() {
        let op = SketchOperator::realize(SketchKind::Srht, 6, 3, SeededRng::new(1), None).unwrap();
        let (padded, signs) = op.srht_signs().unwrap();
        assert_eq!(padded, 8);
        assert_eq!(signs.len(), 8);
        assert!(signs.iter().all(|s| s.abs() == 1.0));
        let rows = op.sample_indices().unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows.iter().all(|&r| r < 8));
    }

    #[test]
    fn leverage_sampler_rescale() {
        let p = profile(vec![1.0, 0.5, 0.5], 2);
        let op =
            SketchOperator::realize(SketchKind::LeverageScore, 3, 2, SeededRng::new(4), Some(&p))
                .unwrap();
        for (&j, &w) in op
            .sample_indices()
            .unwrap()
            .iter()
            .zip(op.sample_weights().unwrap())
        {
            let expected = 1.0 / (2.0 * p.normalized()[j]).sqrt();
            assert_eq!(w, expected);
            if j == 0 {
                assert_eq!(w, 1.0);
            }
        }
    }

    #[test]
    fn realize_errors() {
        assert!(matches!(
            SketchOperator::realize(SketchKind::LeverageScore, 3, 2, SeededRng::new(0), None),
            Err(Error::MissingAux)
        ));
        assert!(matches!(
            SketchOperator::realize(SketchKind::Gaussian, 3, 3, SeededRng::new(0), None),
            Err(Error::DimensionOrder { .. })
        ));
        let negative = profile(vec![1.0, 1.5, -0.5], 2);
        assert!(SketchOperator::realize(
            SketchKind::LeverageScore,
            3,
            2,
            SeededRng::new(0),
            Some(&negative)
        )
        .is_err());
    }

    #[test]
    fn zero_score_rows_are_never_drawn() {
        let zero = profile(vec![1.0, 1.0, 0.0], 2);
        for seed in 0..50 {
            let op = SketchOperator::realize(
                SketchKind::LeverageScore,
                3,
                2,
                SeededRng::new(seed),
                Some(&zero),
            )
            .unwrap();
            let e = Matrix::from_fn(3, 1, |i, _| if i == 2 { 1.0 } else { 0.0 });
            assert_eq!(op.apply(&e).unwrap().max_abs(), 0.0);
        }
    }

    #[test]
    fn identity_mode_leaves_matrix_unchanged() {
        let a = Matrix::from_fn(5, 2, |i, j| (i * 2 + j) as f64);
        assert_eq!(SketchOperator::identity(5).apply(&a).unwrap(), a);
        let iso = mean_gram(5, 7, |_| SketchOperator::identity(5).as_dense()).unwrap();
        assert_eq!(iso, Matrix::identity(5));
    }

    #[test]
    fn full_srht_preserves_frobenius_norm() {
        let signs = vec![1.0, -1.0, -1.0, 1.0, 1.0, 1.0, -1.0, 1.0];
        let op = SketchOperator::srht_from_parts(8, signs, (0..8).collect()).unwrap();
        let a = Matrix::from_fn(8, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let sa = op.apply(&a).unwrap();
        assert!((sa.frobenius_norm() - a.frobenius_norm()).abs() < 1e-12);
    }

    #[test]
    fn uniform_picking_one_row_densifies() {
        let op = SketchOperator::sampler(3, vec![1], vec![3f64.sqrt()]).unwrap();
        let dense = op.as_dense().unwrap();
        assert_eq!(dense.data(), &[0.0, 3f64.sqrt(), 0.0]);
    }

    #[test]
    fn small_rademacher_entries() {
        let op =
            SketchOperator::realize(SketchKind::Rademacher, 3, 2, SeededRng::new(8), None).unwrap();
        let dense = op.as_dense().unwrap();
        assert!(dense
            .data()
            .iter()
            .all(|v| (v.abs() - 1.0 / 2f64.sqrt()).abs() < 1e-15));
    }

    #[test]
    fn streamed_and_stored_agree() {
        let rng = SeededRng::new(77);
        let stored = SketchOperator::realize(SketchKind::Rademacher, 300, 40, rng, None).unwrap();
        assert!(stored.is_stored());
        let streamed = SketchOperator {
            realization: Realization::Streamed {
                rng,
                rademacher: true,
            },
            ..stored.clone()
        };
        let a = Matrix::from_fn(300, 2, |i, j| (i as f64).sin() + j as f64);
        let x = stored.apply(&a).unwrap();
        let y = streamed.apply(&a).unwrap();
        assert!(x.max_abs_diff(&y).unwrap() < 1e-12);
        assert_eq!(stored.as_dense().unwrap(), streamed.as_dense().unwrap());
    }

    #[test]
    fn realization_is_deterministic() {
        let a = Matrix::from_fn(40, 3, |i, j| ((i + 3 * j) % 11) as f64);
        for kind in [SketchKind::Gaussian, SketchKind::Srht, SketchKind::Sjlt] {
            let x = SketchOperator::realize(kind, 40, 10, SeededRng::new(3), None).unwrap();
            let y = SketchOperator::realize(kind, 40, 10, SeededRng::new(3), None).unwrap();
            assert_eq!(x.apply(&a).unwrap(), y.apply(&a).unwrap());
        }
    }
}
