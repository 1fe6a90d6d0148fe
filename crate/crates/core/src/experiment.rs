//! Experiment runners driven by flat `key=value` config files.
//!
//! Every experiment is a pure function of its config: the data comes from
//! `seed` tag 0 and trial `t` of grid point `g` from `seed.child(1).descend([g, t])`.
//! Results are raw rows, one per (grid point, trial, metric); medians are
//! left to downstream tooling.
//!
//! Recognized keys, with defaults:
//!
//! | key | default | meaning |
//! |-----|---------|---------|
//! | `experiment` | required | `flattening`, `se-sweep`, `regression-sweep`, `fedavg`, `hybrid-se`, `hybrid-residual`, `gaussianity` |
//! | `generator` | `tdist:3` | synthetic design, see [`GeneratorKind`] |
//! | `rows`, `cols` | `2000`, `40` | synthetic design size |
//! | `dataset` | unset | CSV file used instead of the generator |
//! | `label_column`, `max_rows`, `standardize` | `0`, unset, `true` | CSV ingestion |
//! | `k` | `8` | list of block counts |
//! | `mu` | `0.8` | list of first-stage ratios `R/N` (`r/n` for `fedavg`) |
//! | `rho` | `0.7` | list of second-stage ratios `R̃/R` |
//! | `local` | `gaussian-orth` | list of node schemes for the sweeps |
//! | `pipelines` | `srht+rademacher` | list of `local+global` hybrids or single-stage kinds |
//! | `projection` | `unitary` | node projection for `flattening` and `fedavg` |
//! | `variants` | `iterative` | list of `iterative`, `static`, `naive`, `exact` |
//! | `iterations`, `local_epochs` | `100`, `1` | descent length |
//! | `schedule` | `lipschitz` | `lipschitz` or `alpha:<value>` |
//! | `xi` | `0.05` | flattening failure probability |
//! | `nu`, `samples` | `1024`, `10000` | Gaussianity inner dimensions and sample count |
//! | `trials`, `seed` | `1`, `0` | |
//! | `output` | unset | CSV destination |
//!
//! Lists are comma separated; `#` starts a comment.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;

use crate::data::{load_csv_dataset, CsvOptions, GeneratorKind, GeneratorSpec};
use crate::distributed::{
    DistributedOperator, DistributedPlan, NodeScheme, Projection, ProjectionKind, SamplingMode,
};
use crate::error::{Error, Result};
use crate::hybrid::{gaussianity_report, HybridOperator, HybridPlan};
use crate::leverage::{flattening_report, leverage_profile, Partition};
use crate::linalg::thin_orthonormalize;
use crate::regression::{
    fedavg_sketched, se_error_for_basis, solve_exact, solve_sketched, GdConfig, RegressionProblem,
    StepSchedule,
};
use crate::rng::SeededRng;
use crate::sketch::{LinearSketch, SketchKind, SketchOperator};

pub const RESULTS_HEADER: [&str; 5] = ["experiment", "trial", "params", "metric", "value"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ExperimentKind {
    /// Leverage-score flattening by local projections.
    Flattening,
    /// Embedding error of distributed local sketching over `k` and `R`.
    SeSweep,
    /// Regression residual of distributed local sketching over `k` and `R`.
    RegressionSweep,
    /// FedAvg traces with local (iterative) sketching.
    FedAvg,
    /// Embedding error of hybrid pipelines over `μ` and `ρ`.
    HybridSe,
    /// Normalized regression residual of hybrid pipelines.
    HybridResidual,
    /// Distance of Rademacher inner products to the normal law.
    Gaussianity,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 7] = [
        ExperimentKind::Flattening,
        ExperimentKind::SeSweep,
        ExperimentKind::RegressionSweep,
        ExperimentKind::FedAvg,
        ExperimentKind::HybridSe,
        ExperimentKind::HybridResidual,
        ExperimentKind::Gaussianity,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Flattening => "flattening",
            ExperimentKind::SeSweep => "se-sweep",
            ExperimentKind::RegressionSweep => "regression-sweep",
            ExperimentKind::FedAvg => "fedavg",
            ExperimentKind::HybridSe => "hybrid-se",
            ExperimentKind::HybridResidual => "hybrid-residual",
            ExperimentKind::Gaussianity => "gaussianity",
        }
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| Error::UnknownExperiment(s.trim().to_string()))
    }
}

/// A hybrid `local+global` pipeline, or a single-stage sketch straight to `R̃`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pipeline {
    Hybrid {
        local: NodeScheme,
        global: SketchKind,
    },
    Single(SketchKind),
}

impl fmt::Display for Pipeline {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Pipeline::Hybrid { local, global } => write!(f, "{local}+{global}"),
            Pipeline::Single(kind) => write!(f, "{kind}"),
        }
    }
}

impl FromStr for Pipeline {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.split_once('+') {
            Some((local, global)) => Ok(Pipeline::Hybrid {
                local: local.parse()?,
                global: global.parse()?,
            }),
            None => s.parse().map(Pipeline::Single),
        }
    }
}

/// Local data treatment in the FedAvg experiment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FedVariant {
    /// Project once, fresh row sample every iteration.
    Iterative,
    /// Project once, one row sample reused throughout.
    Static,
    /// No projection, fresh uniform row sample every iteration.
    Naive,
    /// No sketching: every node uses its whole block.
    Exact,
}

impl FedVariant {
    const ALL: [FedVariant; 4] = [
        FedVariant::Iterative,
        FedVariant::Static,
        FedVariant::Naive,
        FedVariant::Exact,
    ];

    pub fn name(self) -> &'static str {
        match self {
            FedVariant::Iterative => "iterative",
            FedVariant::Static => "static",
            FedVariant::Naive => "naive",
            FedVariant::Exact => "exact",
        }
    }
}

impl fmt::Display for FedVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FedVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.trim())
            .ok_or_else(|| Error::InvalidArgument(format!("unknown FedAvg variant `{s}`")))
    }
}

/// Where the design (and targets) come from.
#[derive(Clone, Debug, PartialEq)]
pub enum DataSource {
    Generator(GeneratorSpec),
    Csv {
        path: PathBuf,
        label_column: usize,
        options: CsvOptions,
    },
}

impl DataSource {
    pub fn load(&self, rng: SeededRng) -> Result<RegressionProblem> {
        match self {
            DataSource::Generator(spec) => spec.generate_regression(rng)?.into_problem(1),
            DataSource::Csv {
                path,
                label_column,
                options,
            } => load_csv_dataset(path, *label_column, *options),
        }
    }
}

fn schedule_to_string(schedule: StepSchedule) -> String {
    match schedule {
        StepSchedule::InverseLipschitz => "lipschitz".into(),
        StepSchedule::InverseAlpha { alpha } => format!("alpha:{alpha}"),
    }
}

/// Parses `lipschitz` or `alpha:<value>`.
pub fn parse_schedule(s: &str) -> Result<StepSchedule> {
    match s.trim() {
        "lipschitz" => Ok(StepSchedule::InverseLipschitz),
        other => other
            .strip_prefix("alpha:")
            .and_then(|a| a.parse().ok())
            .map(|alpha| StepSchedule::InverseAlpha { alpha })
            .ok_or_else(|| Error::InvalidArgument(format!("unknown schedule `{other}`"))),
    }
}

/// Typed experiment configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub data: DataSource,
    pub blocks: Vec<usize>,
    pub mu: Vec<f64>,
    pub rho: Vec<f64>,
    pub local: Vec<NodeScheme>,
    pub pipelines: Vec<Pipeline>,
    pub projection: ProjectionKind,
    pub variants: Vec<FedVariant>,
    pub iterations: usize,
    pub local_epochs: usize,
    pub schedule: StepSchedule,
    pub xi: f64,
    pub nu: Vec<usize>,
    pub samples: usize,
    pub trials: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentKind) -> Self {
        Self {
            experiment,
            data: DataSource::Generator(GeneratorSpec::new(
                GeneratorKind::TDist { dof: 3.0 },
                2000,
                40,
            )),
            blocks: vec![8],
            mu: vec![0.8],
            rho: vec![0.7],
            local: vec![NodeScheme::Projected(
                ProjectionKind::GaussianOrthonormalized,
            )],
            pipelines: vec![Pipeline::Hybrid {
                local: NodeScheme::Sketch(SketchKind::Srht),
                global: SketchKind::Rademacher,
            }],
            projection: ProjectionKind::RandomUnitary,
            variants: vec![FedVariant::Iterative],
            iterations: 100,
            local_epochs: 1,
            schedule: StepSchedule::InverseLipschitz,
            xi: 0.05,
            nu: vec![1024],
            samples: 10_000,
            trials: 1,
            seed: 0,
            output: None,
        }
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    /// Canonical text form; parses back to an equal config.
    pub fn to_config_string(&self) -> String {
        let mut lines = vec![format!("experiment = {}", self.experiment)];
        match &self.data {
            DataSource::Generator(spec) => {
                lines.push(format!("generator = {}", spec.kind));
                lines.push(format!("rows = {}", spec.rows));
                lines.push(format!("cols = {}", spec.cols));
            }
            DataSource::Csv {
                path,
                label_column,
                options,
            } => {
                lines.push(format!("dataset = {}", path.display()));
                lines.push(format!("label_column = {label_column}"));
                if let Some(max) = options.max_rows {
                    lines.push(format!("max_rows = {max}"));
                }
                lines.push(format!("standardize = {}", options.standardize));
            }
        }
        lines.push(format!("k = {}", join(&self.blocks)));
        lines.push(format!("mu = {}", join(&self.mu)));
        lines.push(format!("rho = {}", join(&self.rho)));
        lines.push(format!("local = {}", join(&self.local)));
        lines.push(format!("pipelines = {}", join(&self.pipelines)));
        lines.push(format!("projection = {}", self.projection));
        lines.push(format!("variants = {}", join(&self.variants)));
        lines.push(format!("iterations = {}", self.iterations));
        lines.push(format!("local_epochs = {}", self.local_epochs));
        lines.push(format!("schedule = {}", schedule_to_string(self.schedule)));
        lines.push(format!("xi = {}", self.xi));
        lines.push(format!("nu = {}", join(&self.nu)));
        lines.push(format!("samples = {}", self.samples));
        lines.push(format!("trials = {}", self.trials));
        lines.push(format!("seed = {}", self.seed));
        if let Some(out) = &self.output {
            lines.push(format!("output = {}", out.display()));
        }
        let mut text = lines.join("\n");
        text.push('\n');
        text
    }

    pub fn validate(&self) -> Result<()> {
        let empty = [
            ("k", self.blocks.is_empty()),
            ("mu", self.mu.is_empty()),
            ("rho", self.rho.is_empty()),
            ("local", self.local.is_empty()),
            ("pipelines", self.pipelines.is_empty()),
            ("variants", self.variants.is_empty()),
            ("nu", self.nu.is_empty()),
        ];
        if let Some((key, _)) = empty.iter().find(|(_, e)| *e) {
            return Err(Error::InvalidConfig(format!("`{key}` must not be empty")));
        }
        if self.trials == 0 {
            return Err(Error::InvalidConfig("`trials` must be at least 1".into()));
        }
        if self.blocks.contains(&0) {
            return Err(Error::InvalidConfig("`k` entries must be positive".into()));
        }
        for (key, values) in [("mu", &self.mu), ("rho", &self.rho)] {
            if values.iter().any(|v| !(*v > 0.0 && *v <= 1.0)) {
                return Err(Error::InvalidConfig(format!(
                    "`{key}` entries must lie in (0, 1]"
                )));
            }
        }
        if self.iterations == 0 || self.local_epochs == 0 {
            return Err(Error::InvalidConfig(
                "`iterations` and `local_epochs` must be positive".into(),
            ));
        }
        if let DataSource::Generator(spec) = &self.data {
            spec.validate()?;
        }
        Ok(())
    }
}

fn join<T: fmt::Display>(values: &[T]) -> String {
    values
        .iter()
        .map(T::to_string)
        .collect::<Vec<_>>()
        .join(",")
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| {
            v.parse()
                .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{v}`")))
        })
        .collect()
}

fn parse_one<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::InvalidConfig(format!("`{key}`: cannot parse `{value}`")))
}

impl FromStr for ExperimentConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(usize, String, String)> = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or_default().trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("line {}: expected key = value", index + 1))
            })?;
            let key = key.trim().to_string();
            if entries.iter().any(|(_, k, _)| *k == key) {
                return Err(Error::InvalidConfig(format!(
                    "line {}: duplicate key `{key}`",
                    index + 1
                )));
            }
            entries.push((index + 1, key, value.trim().to_string()));
        }
        let experiment = entries
            .iter()
            .find(|(_, k, _)| k == "experiment")
            .ok_or_else(|| Error::InvalidConfig("missing `experiment`".into()))?
            .2
            .parse()?;
        let mut cfg = ExperimentConfig::new(experiment);
        let (mut kind, mut rows, mut cols) = match cfg.data {
            DataSource::Generator(spec) => (spec.kind, spec.rows, spec.cols),
            DataSource::Csv { .. } => unreachable!("defaults use a generator"),
        };
        let mut dataset: Option<PathBuf> = None;
        let mut label_column = 0;
        let mut options = CsvOptions::default();
        for (line, key, value) in &entries {
            let v = value.as_str();
            let k = key.as_str();
            match k {
                "experiment" => {}
                "generator" => kind = v.parse()?,
                "rows" => rows = parse_one(k, v)?,
                "cols" => cols = parse_one(k, v)?,
                "dataset" => dataset = Some(PathBuf::from(v)),
                "label_column" => label_column = parse_one(k, v)?,
                "max_rows" => options.max_rows = Some(parse_one(k, v)?),
                "standardize" => options.standardize = parse_one(k, v)?,
                "k" => cfg.blocks = parse_list(k, v)?,
                "mu" => cfg.mu = parse_list(k, v)?,
                "rho" => cfg.rho = parse_list(k, v)?,
                "local" => cfg.local = parse_list(k, v)?,
                "pipelines" => cfg.pipelines = parse_list(k, v)?,
                "projection" => cfg.projection = parse_one(k, v)?,
                "variants" => cfg.variants = parse_list(k, v)?,
                "iterations" => cfg.iterations = parse_one(k, v)?,
                "local_epochs" => cfg.local_epochs = parse_one(k, v)?,
                "schedule" => cfg.schedule = parse_schedule(v)?,
                "xi" => cfg.xi = parse_one(k, v)?,
                "nu" => cfg.nu = parse_list(k, v)?,
                "samples" => cfg.samples = parse_one(k, v)?,
                "trials" => cfg.trials = parse_one(k, v)?,
                "seed" => cfg.seed = parse_one(k, v)?,
                "output" => cfg.output = Some(PathBuf::from(v)),
                _ => {
                    return Err(Error::InvalidConfig(format!(
                        "line {line}: unknown key `{k}`"
                    )))
                }
            }
        }
        cfg.data = match dataset {
            Some(path) => DataSource::Csv {
                path,
                label_column,
                options,
            },
            None => DataSource::Generator(GeneratorSpec::new(kind, rows, cols)),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// One measured value.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub experiment: String,
    pub trial: usize,
    /// `key=value` pairs joined by `;`.
    pub params: String,
    pub metric: String,
    pub value: f64,
}

pub fn write_results_csv(rows: &[ResultRow], out: impl Write) -> Result<()> {
    let mut writer = csv::Writer::from_writer(out);
    writer.write_record(RESULTS_HEADER)?;
    for row in rows {
        writer.write_record([
            row.experiment.clone(),
            row.trial.to_string(),
            row.params.clone(),
            row.metric.clone(),
            row.value.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Runs `cfg` and writes its CSV to `cfg.output` when set; returns the rows.
pub fn run_experiment_to_output(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    let rows = run_experiment(cfg)?;
    if let Some(path) = &cfg.output {
        let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        write_results_csv(&rows, std::io::BufWriter::new(file))?;
    }
    Ok(rows)
}

struct Grid<'a> {
    cfg: &'a ExperimentConfig,
    trials_rng: SeededRng,
    rows: Vec<ResultRow>,
    point: u64,
}

impl<'a> Grid<'a> {
    /// Runs every trial of the next grid point; trials run in parallel, rows keep trial order.
    fn point<F>(&mut self, params: String, trial: F) -> Result<()>
    where
        F: Fn(SeededRng) -> Result<Vec<(&'static str, f64)>> + Sync,
    {
        let base = self.trials_rng.child(self.point);
        self.point += 1;
        let results: Vec<Result<Vec<(&'static str, f64)>>> = (0..self.cfg.trials)
            .into_par_iter()
            .map(|t| trial(base.child(t as u64)))
            .collect();
        for (t, metrics) in results.into_iter().enumerate() {
            for (metric, value) in metrics? {
                self.rows.push(ResultRow {
                    experiment: self.cfg.experiment.to_string(),
                    trial: t,
                    params: params.clone(),
                    metric: metric.to_string(),
                    value,
                });
            }
        }
        Ok(())
    }
}

/// Runs the configured experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    cfg.validate()?;
    let root = SeededRng::new(cfg.seed);
    let mut grid = Grid {
        cfg,
        trials_rng: root.child(1),
        rows: Vec::new(),
        point: 0,
    };
    let data_rng = root.child(0);
    match cfg.experiment {
        ExperimentKind::Flattening => flattening(cfg, &mut grid, data_rng)?,
        ExperimentKind::SeSweep | ExperimentKind::RegressionSweep => {
            local_sweep(cfg, &mut grid, data_rng)?
        }
        ExperimentKind::FedAvg => fedavg(cfg, &mut grid, data_rng)?,
        ExperimentKind::HybridSe | ExperimentKind::HybridResidual => {
            hybrid(cfg, &mut grid, data_rng)?
        }
        ExperimentKind::Gaussianity => {
            for &nu in &cfg.nu {
                grid.point(format!("nu={nu};samples={}", cfg.samples), |rng| {
                    let report = gaussianity_report(nu, cfg.samples, rng)?;
                    Ok(vec![("sup_distance", report.statistic)])
                })?;
            }
        }
    }
    Ok(grid.rows)
}

fn flattening(cfg: &ExperimentConfig, grid: &mut Grid<'_>, data_rng: SeededRng) -> Result<()> {
    let problem = cfg.data.load(data_rng)?;
    let a = problem.a();
    for &k in &cfg.blocks {
        let partition = Partition::new(a.rows(), k)?;
        let params = format!("k={k};projection={};xi={}", cfg.projection, cfg.xi);
        grid.point(params, |rng| {
            let projections: Vec<Projection> = (0..k)
                .map(|i| {
                    Projection::realize(cfg.projection, partition.block_rows(), rng.child(i as u64))
                })
                .collect::<Result<_>>()?;
            let report = flattening_report(a, partition, &projections, cfg.xi)?;
            Ok(vec![
                ("fraction_within", report.fraction_within),
                ("pre_coherence", report.pre_coherence),
                ("post_coherence", report.post_coherence),
                (
                    "coherence_ratio",
                    report.post_coherence / report.pre_coherence,
                ),
                ("max_deviation", report.max_deviation()),
            ])
        })?;
    }
    Ok(())
}

fn local_sweep(cfg: &ExperimentConfig, grid: &mut Grid<'_>, data_rng: SeededRng) -> Result<()> {
    let problem = cfg.data.load(data_rng)?;
    let total = problem.a().rows();
    let basis = thin_orthonormalize(problem.a())?;
    let optimum = solve_exact(&problem)?.residual;
    for &scheme in &cfg.local {
        for &k in &cfg.blocks {
            let partition = Partition::new(total, k)?;
            for &mu in &cfg.mu {
                let r = ((mu * partition.block_rows() as f64) + 1e-9).floor() as usize;
                let params = format!("local={scheme};k={k};mu={mu};R={}", r * k);
                let plan = DistributedPlan::new(k, r, scheme);
                grid.point(params, |rng| {
                    let op = DistributedOperator::realize(total, &plan, rng, Some(problem.a()))?;
                    if cfg.experiment == ExperimentKind::SeSweep {
                        Ok(vec![("se_error", se_error_for_basis(&op, &basis)?)])
                    } else {
                        let sol = solve_sketched(&problem, &op)?;
                        Ok(vec![("residual_ratio", sol.residual / optimum)])
                    }
                })?;
            }
        }
    }
    Ok(())
}

fn fedavg(cfg: &ExperimentConfig, grid: &mut Grid<'_>, data_rng: SeededRng) -> Result<()> {
    let base = cfg.data.load(data_rng)?;
    for &variant in &cfg.variants {
        for &k in &cfg.blocks {
            let problem = base.clone().with_blocks(k)?;
            let n = problem.partition().block_rows();
            for &mu in &cfg.mu {
                let mut gd = GdConfig::new(cfg.iterations, 1, cfg.projection);
                gd.schedule = cfg.schedule;
                gd.samples_per_node = ((mu * n as f64) + 1e-9).floor().max(1.0) as usize;
                match variant {
                    FedVariant::Iterative => {}
                    FedVariant::Static => gd.refresh = false,
                    FedVariant::Naive => gd.projection = ProjectionKind::Identity,
                    FedVariant::Exact => {
                        gd.projection = ProjectionKind::Identity;
                        gd.sampling = SamplingMode::InOrder;
                        gd.samples_per_node = n;
                    }
                }
                let params = format!(
                    "variant={variant};k={k};mu={mu};r={};projection={};epochs={}",
                    gd.samples_per_node, gd.projection, cfg.local_epochs
                );
                let start = grid.rows.len();
                grid.point(params.clone(), |rng| {
                    let state = fedavg_sketched(&problem, &gd, cfg.local_epochs, rng)?;
                    Ok(state
                        .trace
                        .iter()
                        .map(|row| ("err_to_opt", row.err_to_opt))
                        .collect())
                })?;
                // Tag each trace entry with its iteration.
                let per_trial = cfg.iterations + 1;
                for (offset, row) in grid.rows[start..].iter_mut().enumerate() {
                    row.params = format!("{params};t={}", offset % per_trial);
                }
            }
        }
    }
    Ok(())
}

fn hybrid(cfg: &ExperimentConfig, grid: &mut Grid<'_>, data_rng: SeededRng) -> Result<()> {
    let problem = cfg.data.load(data_rng)?;
    let (total, cols) = problem.a().shape();
    let basis = thin_orthonormalize(problem.a())?;
    let optimum = solve_exact(&problem)?.residual;
    let needs_profile = cfg
        .pipelines
        .iter()
        .any(|p| matches!(p, Pipeline::Single(SketchKind::LeverageScore)));
    let profile = if needs_profile {
        Some(leverage_profile(problem.a(), Partition::new(total, 1)?)?)
    } else {
        None
    };
    for &pipeline in &cfg.pipelines {
        for &k in &cfg.blocks {
            for &mu in &cfg.mu {
                for &rho in &cfg.rho {
                    let (local, global) = match pipeline {
                        Pipeline::Hybrid { local, global } => (local, global),
                        Pipeline::Single(kind) => (NodeScheme::Sketch(kind), kind),
                    };
                    let plan = HybridPlan::from_ratios(total, cols, k, mu, rho, local, global)?;
                    let params = format!(
                        "pipeline={pipeline};k={k};mu={mu};rho={rho};R={};R_tilde={}",
                        plan.first_dim, plan.second_dim
                    );
                    grid.point(params, |rng| {
                        let op: Box<dyn LinearSketch + Send + Sync> = match pipeline {
                            Pipeline::Hybrid { .. } => {
                                Box::new(HybridOperator::realize(&plan, rng, Some(problem.a()))?)
                            }
                            Pipeline::Single(kind) => Box::new(SketchOperator::realize(
                                kind,
                                total,
                                plan.second_dim,
                                rng,
                                profile.as_ref(),
                            )?),
                        };
                        if cfg.experiment == ExperimentKind::HybridSe {
                            Ok(vec![("se_error", se_error_for_basis(op.as_ref(), &basis)?)])
                        } else {
                            let sol = solve_sketched(&problem, op.as_ref())?;
                            Ok(vec![("normalized_residual", sol.residual / optimum)])
                        }
                    })?;
                }
            }
        }
    }
    Ok(())
}

/// Median of a non-empty slice (mean of the middle pair for even lengths).
pub fn median(values: &[f64]) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = sorted.len() / 2;
    if sorted.len().is_multiple_of(2) {
        0.5 * (sorted[mid - 1] + sorted[mid])
    } else {
        sorted[mid]
    }
}

/// Medians of `metric` per distinct `params`, in first-appearance order.
pub fn medians_by_params(rows: &[ResultRow], metric: &str) -> Vec<(String, f64)> {
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for row in rows.iter().filter(|r| r.metric == metric) {
        match groups.iter_mut().find(|(p, _)| *p == row.params) {
            Some((_, values)) => values.push(row.value),
            None => groups.push((row.params.clone(), vec![row.value])),
        }
    }
    groups.into_iter().map(|(p, v)| (p, median(&v))).collect()
}
