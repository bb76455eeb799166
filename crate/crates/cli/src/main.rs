use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use loclearn::constants::Constants;
use loclearn::estimation::{build_session, estimate_error};
use loclearn::experiment::{cluster_distribution, realizable_distribution, run_experiment, ExperimentConfig, Mode};
use loclearn::io::read_dataset;
use loclearn::learner::{DistributionLabels, FixedLabels, LabelSource, QuerySession, UnlabeledPool};
use loclearn::nw::{nw_error_with_constants, KdeMode, NwDataset};
use loclearn::partition::preprocess;
use loclearn::properties::run_suite;
use loclearn::synthetic::SyntheticDistribution;

#[derive(Parser)]
#[command(name = "loclearn", version, about = "Local Lipschitz learning and error estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Problem {
    /// Lipschitz constant.
    #[arg(long = "L", default_value_t = 10.0)]
    lipschitz: f64,
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    #[arg(long, default_value_t = 1)]
    dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum Command {
    /// Print the random partition for a seed as JSON.
    Preprocess {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Answer point queries with the local learner.
    Query {
        #[command(flatten)]
        problem: Problem,
        /// Labeled CSV used as the pool; otherwise a pool is drawn from the
        /// distribution.
        #[arg(long)]
        data: Option<PathBuf>,
        /// JSON file with a synthetic distribution.
        #[arg(long)]
        distribution: Option<PathBuf>,
        /// A query point, comma separated. Repeatable.
        #[arg(long = "x")]
        points: Vec<String>,
        /// CSV of query points (header `x1,...,xd`).
        #[arg(long)]
        eval: Option<PathBuf>,
        /// Session checkpoint; restored when it exists, written after the
        /// queries.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the best achievable absolute error of the Lipschitz class.
    EstimateError {
        #[command(flatten)]
        problem: Problem,
        #[arg(long)]
        distribution: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate the best kernel-regression error over diagonal transforms.
    NwError {
        #[command(flatten)]
        problem: Problem,
        #[arg(long, default_value_t = 0.1)]
        delta: f64,
        /// Dataset CSV (`x1,...,xd[,y]`); missing labels come from the
        /// distribution.
        #[arg(long)]
        data: PathBuf,
        /// Distribution of the labeled draws; defaults to the cluster instance.
        #[arg(long)]
        distribution: Option<PathBuf>,
        #[arg(long = "kde-mode", default_value = "exact")]
        kde_mode: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the invariant checks; exits nonzero on any failure.
    Properties {
        #[arg(long, default_values_t = [0u64])]
        seed: Vec<u64>,
    },
    /// Run an experiment config and write its result table.
    Experiment {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output path.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn load_distribution(path: Option<&Path>) -> Result<Option<SyntheticDistribution>> {
    let Some(path) = path else { return Ok(None) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let d: SyntheticDistribution = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok(Some(SyntheticDistribution::new(d.marginal, d.target)?))
}

fn parse_point(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|v| v.trim().parse::<f64>().with_context(|| format!("bad coordinate `{v}`")))
        .collect()
}

fn query_session(
    p: &Problem,
    data: Option<&Path>,
    dist: Option<SyntheticDistribution>,
    checkpoint: Option<&Path>,
) -> Result<QuerySession> {
    let constants = Constants::from_env()?;
    let dist = match dist {
        Some(d) => d,
        None => realizable_distribution(p.dims, p.lipschitz, p.seed)?,
    };
    if let Some(path) = checkpoint.filter(|c| c.exists()) {
        let source: Arc<dyn LabelSource> = match data {
            Some(d) => Arc::new(FixedLabels(read_dataset(d)?.labels.context("pool CSV needs a `y` column")?)),
            None => Arc::new(DistributionLabels::new(dist, p.seed)),
        };
        return Ok(QuerySession::load_checkpoint(path, Some(source))?);
    }
    match data {
        None => Ok(build_session(p.lipschitz, p.epsilon, p.dims, &dist, p.seed, &constants)?),
        Some(path) => {
            let ds = read_dataset(path)?;
            let labels = ds.labels.clone().context("pool CSV needs a `y` column")?;
            let partition = preprocess(p.lipschitz, p.epsilon, ds.dims(), p.seed)?;
            let cap = constants.sample_cap(partition.scheme(), p.epsilon, ds.dims());
            let pool = UnlabeledPool::new(ds.dims(), ds.points)?;
            Ok(QuerySession::new(partition, pool, Arc::new(FixedLabels(labels)), cap)?)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Preprocess { problem: p, out } => {
            let partition = preprocess(p.lipschitz, p.epsilon, p.dims, p.seed)?;
            emit(out.as_deref(), &(partition.to_json()? + "\n"))?;
        }
        Command::Query {
            problem,
            data,
            distribution,
            points,
            eval,
            checkpoint,
            out,
        } => {
            let session = query_session(&problem, data.as_deref(), load_distribution(distribution.as_deref())?, checkpoint.as_deref())?;
            let mut queries = points.iter().map(|s| parse_point(s)).collect::<Result<Vec<_>>>()?;
            if let Some(path) = eval {
                queries.extend(read_dataset(&path)?.points);
            }
            if queries.is_empty() {
                bail!("no queries: pass --x or --eval");
            }
            let dims = session.partition().dims();
            let mut text: String = (1..=dims).map(|k| format!("x{k},")).collect::<String>() + "value\n";
            for q in &queries {
                let v = session.query(q)?;
                let coords: Vec<String> = q.iter().map(f64::to_string).collect();
                text += &format!("{},{v}\n", coords.join(","));
            }
            emit(out.as_deref(), &text)?;
            if let Some(path) = checkpoint {
                session.save_checkpoint(&path)?;
            }
        }
        Command::EstimateError { problem: p, distribution, out } => {
            let dist = match load_distribution(distribution.as_deref())? {
                Some(d) => d,
                None => realizable_distribution(p.dims, p.lipschitz, p.seed)?,
            };
            let est = estimate_error(p.lipschitz, p.epsilon, p.dims, &dist, p.seed, &Constants::from_env()?)?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&est)? + "\n"))?;
        }
        Command::NwError {
            problem: p,
            delta,
            data,
            distribution,
            kde_mode,
            out,
        } => {
            let ds = read_dataset(&data)?;
            let dist = match load_distribution(distribution.as_deref())? {
                Some(d) => d,
                None => cluster_distribution(ds.dims())?,
            };
            let source: Arc<dyn LabelSource> = match ds.labels {
                Some(labels) => Arc::new(FixedLabels(labels)),
                None => Arc::new(DistributionLabels::new(dist.clone(), p.seed)),
            };
            let dataset = NwDataset::new(ds.points, source)?;
            let mode: KdeMode = kde_mode.parse()?;
            let est = nw_error_with_constants(&dataset, &dist, p.epsilon, delta, p.seed, mode, &Constants::from_env()?)?;
            emit(out.as_deref(), &(serde_json::to_string_pretty(&est)? + "\n"))?;
        }
        Command::Properties { seed } => {
            let mut ok = true;
            for s in seed {
                for c in run_suite(s) {
                    ok &= c.passed;
                    println!("{} seed={} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.seed, c.name, c.detail);
                }
            }
            return Ok(if ok { ExitCode::SUCCESS } else { ExitCode::FAILURE });
        }
        Command::Experiment { config, out } => {
            let text = std::fs::read_to_string(&config).with_context(|| format!("reading {}", config.display()))?;
            let mut cfg = ExperimentConfig::from_json(&text)?;
            if out.is_some() {
                cfg.output = out;
            }
            let report = run_experiment(&cfg)?;
            emit(cfg.output.as_deref(), &report.to_csv_string()?)?;
            if cfg.mode == Mode::NwEst {
                let json = serde_json::to_string_pretty(&report.nw_estimates)? + "\n";
                match &cfg.output {
                    Some(path) => std::fs::write(path.with_extension("json"), json)?,
                    None => eprint!("{json}"),
                }
            }
            for c in &report.failed_checks {
                eprintln!("FAIL seed={} {}: {}", c.seed, c.name, c.detail);
            }
            if cfg.mode == Mode::PropertySuite && !report.all_passed() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
