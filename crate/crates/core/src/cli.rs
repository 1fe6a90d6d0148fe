//! Command-line interface of the `hydrosketch` binary.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::data::{load_csv_dataset, CsvOptions, GeneratorKind, GeneratorSpec};
use crate::distributed::Projection;
use crate::distributed::{
    aggregate, node_configs, node_sketch, NodeScheme, ProjectionKind, SamplingMode,
};
use crate::error::{Error, Result};
use crate::experiment::{parse_schedule, run_experiment, write_results_csv, ExperimentConfig};
use crate::hybrid::{
    gaussianity_report, hybrid_sketch, plan_for_accuracy, plan_from_budget, DimensionFormula,
    HybridPlan, NetworkBudget,
};
use crate::io::{aggregate_dir, read_matrix_csv, write_local_sketches, write_matrix};
use crate::leverage::{bins_report, flattening_report, Partition};
use crate::matrix::Matrix;
use crate::regression::{
    fedavg_sketched, iterative_sketched_gd, GdConfig, GdState, RegressionProblem,
};
use crate::rng::{SeededRng, SEED_ENV_VAR};
use crate::sketch::SketchKind;

#[derive(Debug, Parser)]
#[command(
    name = "hydrosketch",
    version,
    about = "Distributed local and hybrid sketching"
)]
pub struct Cli {
    /// Root seed; falls back to the HYDROSKETCH_SEED environment variable, then 0.
    #[arg(long, global = true, env = SEED_ENV_VAR)]
    pub seed: Option<u64>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Distributed local sketch of a CSV matrix.
    Sketch(SketchArgs),
    /// Two-stage hybrid sketch of a CSV matrix.
    Hybrid(HybridArgs),
    /// Print a hybrid plan as key=value lines.
    Plan(PlanArgs),
    /// Iteratively sketched distributed gradient descent.
    Gd(GdArgs),
    /// FedAvg on sketched local data.
    Fedavg(FedavgArgs),
    /// Write a synthetic design (and targets) as CSV.
    Generate(GenerateArgs),
    /// Per-row leverage flattening report.
    DiagFlatten(FlattenArgs),
    /// Balls-into-bins counts of uniform sampling.
    DiagBins(BinsArgs),
    /// Distance of Rademacher inner products to the normal law.
    DiagGauss(GaussArgs),
    /// Run an experiment config file.
    Experiment(ExperimentArgs),
}

#[derive(Debug, Args)]
pub struct SketchArgs {
    /// Input matrix (CSV, header optional). Not needed with --from-nodes.
    #[arg(long, required_unless_present = "from_nodes")]
    pub input: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    /// Rows kept per node.
    #[arg(long, required_unless_present = "from_nodes")]
    pub r: Option<usize>,
    /// Node scheme: a projection (unitary, gaussian-orth, hadamard, rademacher-proj, identity)
    /// or a sketch kind (gaussian, rademacher, srht, uniform, leverage, sjlt).
    #[arg(long, default_value = "unitary")]
    pub proj: NodeScheme,
    /// Take the first r projected rows instead of sampling.
    #[arg(long)]
    pub in_order: bool,
    /// Also write every node's payload and a manifest into this directory.
    #[arg(long)]
    pub nodes_dir: Option<PathBuf>,
    /// Aggregate the local sketches of a node directory instead of sketching.
    #[arg(long, conflicts_with_all = ["input", "nodes_dir"])]
    pub from_nodes: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct HybridArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
    #[arg(long)]
    pub mu: f64,
    #[arg(long)]
    pub rho: f64,
    #[arg(long, default_value = "srht")]
    pub local: NodeScheme,
    #[arg(long, default_value = "rademacher")]
    pub global: SketchKind,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Total rows N.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub d: usize,
    #[arg(long)]
    pub k: usize,
    /// Per-node uplink budget, in reals.
    #[arg(long, requires_all = ["c2", "c3"], required_unless_present = "epsilon")]
    pub c1: Option<u64>,
    /// Coordinator storage budget, in reals.
    #[arg(long)]
    pub c2: Option<u64>,
    /// Final sketch size budget, in reals.
    #[arg(long)]
    pub c3: Option<u64>,
    /// Target distortion; plans from the dimension formulas instead of budgets.
    #[arg(long, requires = "delta", conflicts_with = "c1")]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value = "srht")]
    pub local: NodeScheme,
    #[arg(long, default_value = "rademacher")]
    pub global: SketchKind,
    /// First-stage formula: `sparse-srht` or a sketch kind name.
    #[arg(long, default_value = "sparse-srht")]
    pub first_formula: String,
}

#[derive(Debug, Args)]
pub struct ProblemArgs {
    /// Design matrix (CSV).
    #[arg(long)]
    pub input: PathBuf,
    /// Targets (single-column CSV). Without it, --label-column of the input is used.
    #[arg(long)]
    pub labels: Option<PathBuf>,
    #[arg(long, default_value_t = 0, conflicts_with = "labels")]
    pub label_column: usize,
    /// Standardize feature columns (only with --label-column).
    #[arg(long, conflicts_with = "labels")]
    pub standardize: bool,
    #[arg(long, default_value_t = 1)]
    pub k: usize,
}

impl ProblemArgs {
    fn load(&self) -> Result<RegressionProblem> {
        match &self.labels {
            Some(labels) => RegressionProblem::new(
                read_matrix_csv(&self.input)?,
                read_matrix_csv(labels)?,
                self.k,
            ),
            None => load_csv_dataset(
                &self.input,
                self.label_column,
                CsvOptions {
                    standardize: self.standardize,
                    max_rows: None,
                },
            )?
            .with_blocks(self.k),
        }
    }
}

#[derive(Debug, Args)]
pub struct DescentArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Rows sampled per node and iteration.
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value = "unitary")]
    pub proj: ProjectionKind,
    /// `lipschitz` or `alpha:<value>`.
    #[arg(long, default_value = "lipschitz")]
    pub schedule: String,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    /// Reuse the first row sample instead of refreshing it every iteration.
    #[arg(long)]
    pub static_sample: bool,
    /// Trace CSV (t,eta,loss,err_to_opt); standard output when absent.
    #[arg(long)]
    pub trace: Option<PathBuf>,
}

impl DescentArgs {
    fn config(&self) -> Result<GdConfig> {
        let mut cfg = GdConfig::new(self.iters, self.r, self.proj);
        cfg.schedule = parse_schedule(&self.schedule)?;
        cfg.refresh = !self.static_sample;
        Ok(cfg)
    }
}

#[derive(Debug, Args)]
pub struct GdArgs {
    #[command(flatten)]
    pub descent: DescentArgs,
}

#[derive(Debug, Args)]
pub struct FedavgArgs {
    #[command(flatten)]
    pub descent: DescentArgs,
    #[arg(long, default_value_t = 1)]
    pub epochs: usize,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// `tdist[:dof]`, `sparse[:density]`, `varying[:factor[:groups]]`, `gaussian[:sigma]`.
    #[arg(long, default_value = "tdist:3")]
    pub generator: GeneratorKind,
    #[arg(long)]
    pub rows: usize,
    #[arg(long)]
    pub cols: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Also write targets `b = A x0 + noise` here.
    #[arg(long)]
    pub labels_out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FlattenArgs {
    /// Input matrix; a generated one when absent.
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long, default_value = "tdist:3", conflicts_with = "input")]
    pub generator: GeneratorKind,
    #[arg(long, default_value_t = 2000)]
    pub rows: usize,
    #[arg(long, default_value_t = 40)]
    pub cols: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long, default_value = "unitary")]
    pub proj: ProjectionKind,
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BinsArgs {
    /// Total rows N.
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    /// Total samples R.
    #[arg(long)]
    pub r: usize,
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GaussArgs {
    /// Inner dimensions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "1024")]
    pub nu: Vec<usize>,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's `output`.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).map_err(|e| Error::io(p, e))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn write_matrix_to(m: &Matrix, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    write_matrix(m, &mut out)?;
    out.flush()?;
    Ok(())
}

fn write_trace(state: &GdState, path: Option<&Path>) -> Result<()> {
    let mut out = output(path)?;
    state.write_trace_csv(&mut out)?;
    out.flush()?;
    log::info!(
        "final relative error {:.3e} after {} iterations",
        state.final_error(),
        state.t
    );
    Ok(())
}

fn parse_first_formula(s: &str) -> Result<DimensionFormula> {
    match s {
        "sparse-srht" => Ok(DimensionFormula::SparseSrht),
        other => other.parse().map(DimensionFormula::Sketch),
    }
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let rng = SeededRng::new(cli.seed.unwrap_or(0));
    match cli.command {
        Command::Sketch(args) => {
            if let Some(dir) = &args.from_nodes {
                return write_matrix_to(&aggregate_dir(dir)?.sketch, args.out.as_deref());
            }
            let (Some(input), Some(r)) = (&args.input, args.r) else {
                return Err(Error::InvalidArgument(
                    "--input and --r are required".into(),
                ));
            };
            let a = read_matrix_csv(input)?;
            let partition = Partition::new(a.rows(), args.k)?;
            let sampling = if args.in_order {
                SamplingMode::InOrder
            } else {
                SamplingMode::Uniform
            };
            let locals = node_configs(partition, r, args.proj, sampling, rng)
                .into_iter()
                .zip(partition.ranges())
                .map(|(cfg, range)| node_sketch(&a.row_range(range), cfg))
                .collect::<Result<Vec<_>>>()?;
            if let Some(dir) = &args.nodes_dir {
                write_local_sketches(dir, &locals)?;
            }
            write_matrix_to(&aggregate(&locals)?.sketch, args.out.as_deref())
        }
        Command::Hybrid(args) => {
            let a = read_matrix_csv(&args.input)?;
            let plan = HybridPlan::from_ratios(
                a.rows(),
                a.cols(),
                args.k,
                args.mu,
                args.rho,
                args.local,
                args.global,
            )?;
            write_matrix_to(&hybrid_sketch(&a, &plan, rng)?, args.out.as_deref())
        }
        Command::Plan(args) => {
            let plan = match (args.epsilon, args.delta) {
                (Some(epsilon), Some(delta)) => plan_for_accuracy(
                    args.n,
                    args.d,
                    args.k,
                    epsilon,
                    delta,
                    args.local,
                    args.global,
                    parse_first_formula(&args.first_formula)?,
                )?,
                _ => {
                    let budget = match (args.c1, args.c2, args.c3) {
                        (Some(c1), Some(c2), Some(c3)) => NetworkBudget::new(c1, c2, c3)?,
                        _ => {
                            return Err(Error::InvalidArgument(
                                "either --c1/--c2/--c3 or --epsilon/--delta is required".into(),
                            ))
                        }
                    };
                    plan_from_budget(args.n, args.d, args.k, budget)?
                        .with_kinds(args.local, args.global)
                }
            };
            let mut out = io::stdout().lock();
            plan.write_key_values(&mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::Gd(args) => {
            let problem = args.descent.problem.load()?;
            let state = iterative_sketched_gd(&problem, &args.descent.config()?, rng)?;
            write_trace(&state, args.descent.trace.as_deref())
        }
        Command::Fedavg(args) => {
            let problem = args.descent.problem.load()?;
            let state = fedavg_sketched(&problem, &args.descent.config()?, args.epochs, rng)?;
            write_trace(&state, args.descent.trace.as_deref())
        }
        Command::Generate(args) => {
            let spec = GeneratorSpec::new(args.generator, args.rows, args.cols);
            let data = spec.generate_regression(rng)?;
            if let Some(path) = &args.labels_out {
                write_matrix_to(&data.b, Some(path))?;
            }
            write_matrix_to(&data.a, args.out.as_deref())
        }
        Command::DiagFlatten(args) => {
            let a = match &args.input {
                Some(path) => read_matrix_csv(path)?,
                None => GeneratorSpec::new(args.generator, args.rows, args.cols)
                    .generate(rng.child(0))?,
            };
            let partition = Partition::new(a.rows(), args.k)?;
            let projections = (0..args.k)
                .map(|i| {
                    Projection::realize(
                        args.proj,
                        partition.block_rows(),
                        rng.child(1).child(i as u64),
                    )
                })
                .collect::<Result<Vec<_>>>()?;
            let report = flattening_report(&a, partition, &projections, args.xi)?;
            log::info!(
                "{:.4} of rows within zeta; coherence {:.4e} -> {:.4e}",
                report.fraction_within,
                report.pre_coherence,
                report.post_coherence
            );
            let mut out = output(args.out.as_deref())?;
            report.write_csv(&mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::DiagBins(args) => {
            let report = bins_report(args.n, args.k, args.r, args.trials, rng)?;
            log::info!("exceedance frequency {:.4}", report.exceedance_frequency());
            let mut out = output(args.out.as_deref())?;
            report.write_csv(&mut out)?;
            out.flush()?;
            Ok(())
        }
        Command::DiagGauss(args) => {
            let mut out = output(args.out.as_deref())?;
            writeln!(out, "nu,samples,statistic")?;
            for (i, &nu) in args.nu.iter().enumerate() {
                let report = gaussianity_report(nu, args.samples, rng.child(i as u64))?;
                writeln!(out, "{},{},{}", report.nu, report.samples, report.statistic)?;
            }
            out.flush()?;
            Ok(())
        }
        Command::Experiment(args) => {
            let mut cfg = ExperimentConfig::from_file(&args.config)?;
            if let Some(seed) = cli.seed {
                cfg.seed = seed;
            }
            let rows = run_experiment(&cfg)?;
            let path = args.out.or(cfg.output);
            let mut out = output(path.as_deref())?;
            write_results_csv(&rows, &mut out)?;
            out.flush()?;
            Ok(())
        }
    }
}
