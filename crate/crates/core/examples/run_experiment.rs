//! Runs an experiment config (default: a small hybrid comparison) and prints per-point medians.

use hydrosketch::experiment::{medians_by_params, run_experiment, ExperimentConfig};

const DEFAULT: &str = "
experiment = hybrid-se
generator = tdist:3
rows = 2048
cols = 20
k = 8
mu = 0.7,0.8
rho = 0.7
pipelines = srht+rademacher,srht+srht
trials = 3
seed = 1
";

fn main() -> hydrosketch::Result<()> {
    let cfg = match std::env::args().nth(1) {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => DEFAULT.parse()?,
    };
    let rows = run_experiment(&cfg)?;
    let metric = rows.first().map(|r| r.metric.clone()).unwrap_or_default();
    for (params, median) in medians_by_params(&rows, &metric) {
        println!("{params}: median {metric} {median:.4}");
    }
    Ok(())
}
