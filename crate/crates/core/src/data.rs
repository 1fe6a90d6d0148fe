//! Synthetic data generators and CSV dataset ingestion.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{StandardNormal, StudentT};

use crate::error::{Error, Result};
use crate::io::read_matrix_csv;
use crate::matrix::Matrix;
use crate::regression::RegressionProblem;
use crate::rng::SeededRng;

/// Noise level of regression targets for generators that do not set one.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.1;
pub const DEFAULT_TDIST_DOF: f64 = 3.0;

/// Entry distribution of a synthetic design matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum GeneratorKind {
    /// i.i.d. Student-t entries.
    TDist { dof: f64 },
    /// `⌊density·N·d⌋` nonzeros at uniformly chosen positions, values uniform in `[-1, 1)`.
    SparseUniform { density: f64 },
    /// Gaussian entries; row group `g` of `groups` is scaled by `factor^g`.
    VaryingMagnitude { factor: f64, groups: usize },
    /// Gaussian entries; targets carry noise of standard deviation `sigma`.
    GaussianNoiseRegression { sigma: f64 },
}

impl fmt::Display for GeneratorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GeneratorKind::TDist { dof } => write!(f, "tdist:{dof}"),
            GeneratorKind::SparseUniform { density } => write!(f, "sparse:{density}"),
            GeneratorKind::VaryingMagnitude { factor, groups } => {
                write!(f, "varying:{factor}:{groups}")
            }
            GeneratorKind::GaussianNoiseRegression { sigma } => write!(f, "gaussian:{sigma}"),
        }
    }
}

impl FromStr for GeneratorKind {
    type Err = Error;

    /// Accepts `tdist[:dof]`, `sparse[:density]`, `varying[:factor[:groups]]`, `gaussian[:sigma]`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let name = parts.next().unwrap_or_default();
        let bad = || Error::InvalidArgument(format!("cannot parse generator `{s}`"));
        let mut number = |default: f64| -> Result<f64> {
            parts
                .next()
                .map_or(Ok(default), |p| p.parse().map_err(|_| bad()))
        };
        let kind = match name {
            "tdist" => GeneratorKind::TDist {
                dof: number(DEFAULT_TDIST_DOF)?,
            },
            "sparse" => GeneratorKind::SparseUniform {
                density: number(0.1)?,
            },
            "varying" => {
                let factor = number(2.0)?;
                let groups = number(8.0)?;
                if groups.fract() != 0.0 || groups < 1.0 {
                    return Err(bad());
                }
                GeneratorKind::VaryingMagnitude {
                    factor,
                    groups: groups as usize,
                }
            }
            "gaussian" => GeneratorKind::GaussianNoiseRegression {
                sigma: number(DEFAULT_NOISE_SIGMA)?,
            },
            _ => return Err(bad()),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(kind)
    }
}

/// A synthetic `rows × cols` design.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorSpec {
    pub kind: GeneratorKind,
    pub rows: usize,
    pub cols: usize,
}

/// A design with regression targets `b = A x₀ + noise`.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedData {
    pub a: Matrix,
    pub b: Matrix,
    pub x0: Matrix,
}

impl GeneratedData {
    pub fn into_problem(self, blocks: usize) -> Result<RegressionProblem> {
        RegressionProblem::new(self.a, self.b, blocks)
    }
}

impl GeneratorSpec {
    pub fn new(kind: GeneratorKind, rows: usize, cols: usize) -> Self {
        Self { kind, rows, cols }
    }

    pub fn validate(&self) -> Result<()> {
        if self.cols == 0 || self.rows < self.cols {
            return Err(Error::InvalidArgument(format!(
                "generator needs N >= d >= 1, got {}x{}",
                self.rows, self.cols
            )));
        }
        match self.kind {
            GeneratorKind::TDist { dof } if !(dof >= 1.0) => Err(Error::OutOfRange {
                name: "dof",
                value: dof,
                range: "[1, ∞)",
            }),
            GeneratorKind::SparseUniform { density } if !(density > 0.0 && density <= 1.0) => {
                Err(Error::OutOfRange {
                    name: "density",
                    value: density,
                    range: "(0, 1]",
                })
            }
            GeneratorKind::VaryingMagnitude { factor, groups }
                if !(factor > 0.0) || groups == 0 || groups > self.rows =>
            {
                Err(Error::InvalidArgument(format!(
                    "varying magnitude needs factor > 0 and 1..={} groups",
                    self.rows
                )))
            }
            GeneratorKind::GaussianNoiseRegression { sigma } if !(sigma >= 0.0) => {
                Err(Error::OutOfRange {
                    name: "sigma",
                    value: sigma,
                    range: "[0, ∞)",
                })
            }
            _ => Ok(()),
        }
    }

    /// The design matrix, a pure function of `rng`'s seed.
    pub fn generate(&self, rng: SeededRng) -> Result<Matrix> {
        self.validate()?;
        let (rows, cols) = (self.rows, self.cols);
        let mut stream = rng.stream();
        Ok(match self.kind {
            GeneratorKind::TDist { dof } => {
                let dist = StudentT::new(dof).map_err(|e| Error::InvalidArgument(e.to_string()))?;
                Matrix::from_fn(rows, cols, |_, _| stream.sample(dist))
            }
            GeneratorKind::SparseUniform { density } => {
                let total = rows * cols;
                let nonzeros = (density * total as f64).floor() as usize;
                let mut a = Matrix::zeros(rows, cols);
                for pos in rand::seq::index::sample(&mut stream, total, nonzeros) {
                    a.data_mut()[pos] = stream.random_range(-1.0..1.0);
                }
                a
            }
            GeneratorKind::VaryingMagnitude { factor, groups } => {
                let group_rows = rows.div_ceil(groups);
                Matrix::from_fn(rows, cols, |i, _| {
                    let z: f64 = stream.sample(StandardNormal);
                    z * factor.powi((i / group_rows) as i32)
                })
            }
            GeneratorKind::GaussianNoiseRegression { .. } => {
                Matrix::from_fn(rows, cols, |_, _| stream.sample(StandardNormal))
            }
        })
    }

    fn noise_sigma(&self) -> f64 {
        match self.kind {
            GeneratorKind::GaussianNoiseRegression { sigma } => sigma,
            _ => DEFAULT_NOISE_SIGMA,
        }
    }

    /// Design from `rng.child(0)` and targets from `rng.child(1)`.
    pub fn generate_regression(&self, rng: SeededRng) -> Result<GeneratedData> {
        let a = self.generate(rng.child(0))?;
        let (b, x0) = regression_targets(&a, self.noise_sigma(), rng.child(1))?;
        Ok(GeneratedData { a, b, x0 })
    }
}

/// `b = A x₀ + σ·z` with `x₀` and `z` standard Gaussian; returns `(b, x₀)`.
pub fn regression_targets(
    a: &Matrix,
    noise_sigma: f64,
    rng: SeededRng,
) -> Result<(Matrix, Matrix)> {
    let mut coef = rng.child(0).stream();
    let x0 = Matrix::from_fn(a.cols(), 1, |_, _| coef.sample(StandardNormal));
    let mut noise = rng.child(1).stream();
    let mut b = a.matmul(&x0)?;
    for v in b.data_mut() {
        *v += noise_sigma * noise.sample::<f64, _>(StandardNormal);
    }
    Ok((b, x0))
}

/// Ingestion options for [`load_csv_dataset`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CsvOptions {
    /// Center and scale every feature column to unit variance.
    pub standardize: bool,
    /// Keep only the first rows.
    pub max_rows: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            standardize: true,
            max_rows: None,
        }
    }
}

/// Loads a numeric CSV, splitting `label_column` (0-based) off as the target.
///
/// The problem has a single block; use [`RegressionProblem::with_blocks`] to split it.
pub fn load_csv_dataset(
    path: impl AsRef<Path>,
    label_column: usize,
    options: CsvOptions,
) -> Result<RegressionProblem> {
    let mut all = read_matrix_csv(path)?;
    if let Some(max) = options.max_rows {
        if max < all.rows() {
            all = all.row_range(0..max);
        }
    }
    if label_column >= all.cols() || all.cols() < 2 {
        return Err(Error::InvalidArgument(format!(
            "label column {label_column} needs at least one other column among {}",
            all.cols()
        )));
    }
    let b = all.column_range(label_column..label_column + 1);
    let mut a = all
        .column_range(0..label_column)
        .hstack(&all.column_range(label_column + 1..all.cols()))?;
    if options.standardize {
        standardize_columns(&mut a);
    }
    RegressionProblem::new(a, b, 1)
}

/// Zero mean and unit population variance per column; constant columns are only centered.
pub fn standardize_columns(a: &mut Matrix) {
    let (rows, cols) = a.shape();
    for j in 0..cols {
        let column = a.column(j);
        let mean = column.iter().sum::<f64>() / rows as f64;
        let var = column.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / rows as f64;
        let scale = if var > 0.0 { var.sqrt().recip() } else { 1.0 };
        for (i, v) in column.iter().enumerate() {
            a.set(i, j, (v - mean) * scale);
        }
    }
}
