//! Seeded experiment runs and their result tables.
//!
//! An [`ExperimentConfig`] names a mode, the problem parameters and a list of
//! seeds. [`run_experiment`] runs every seed independently (in parallel) and
//! returns one [`ResultRow`] per seed plus a summary row. Rows carry the
//! constants that produced them. Wall time is recorded only when `timing` is
//! set, so that identical configs give byte-identical tables.

use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::estimation::{build_session, draw_pairs, estimate_error, mean_residual, oracle_error};
use crate::geometry::AxisBox;
use crate::io::read_dataset;
use crate::learner::{DistributionLabels, FixedLabels, LabelSource};
use crate::lipschitz::{random_lipschitz_fn, ExtensionRule};
use crate::nw::{epsilon_net, exact_losses, nw_error_with_constants, KdeMode, NwDataset, NwEstimate};
use crate::properties::{run_suite, PropertyCheck};
use crate::rng::{self, Stage};
use crate::synthetic::{Marginal, MixtureComponent, PointSampler, SyntheticDistribution, Target};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Excess error of the local learner over the best Lipschitz fit.
    LocalQuery,
    /// Error estimate against the global ERM baseline.
    ErrorEst,
    /// Kernel error estimate against the exact minimum over the net.
    NwEst,
    PropertySuite,
}

fn default_delta() -> f64 {
    0.1
}

fn default_n_eval() -> usize {
    1000
}

fn default_n_data() -> usize {
    200
}

fn default_kde_mode() -> String {
    "exact".into()
}

fn default_l() -> f64 {
    1.0
}

fn default_epsilon() -> f64 {
    0.5
}

fn default_dims() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(rename = "L", default = "default_l")]
    pub lipschitz_constant: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_dims")]
    pub dims: usize,
    pub seeds: Vec<u64>,
    /// Failure probability of the kernel estimator.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Defaults to a random realizable target (regression modes) or
    /// [`cluster_distribution`] (kernel mode).
    #[serde(default)]
    pub distribution: Option<SyntheticDistribution>,
    /// CSV dataset for the kernel mode; otherwise `n_data` points are drawn.
    #[serde(default)]
    pub data: Option<PathBuf>,
    #[serde(default = "default_n_data")]
    pub n_data: usize,
    /// Labeled points for the baseline.
    #[serde(default = "default_n_eval")]
    pub n_eval: usize,
    /// `exact` or `subsample:<m>`.
    #[serde(default = "default_kde_mode")]
    pub kde_mode: String,
    /// Replaces the constants from `LOCLEARN_CONSTANTS`.
    #[serde(default)]
    pub constants: Option<Constants>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub timing: bool,
}

fn config_err(field: &str, reason: impl Into<String>) -> Error {
    Error::Config {
        field: field.into(),
        reason: reason.into(),
    }
}

impl ExperimentConfig {
    pub fn new(mode: Mode, lipschitz_constant: f64, epsilon: f64, dims: usize, seeds: Vec<u64>) -> Self {
        Self {
            mode,
            lipschitz_constant,
            epsilon,
            dims,
            seeds,
            delta: default_delta(),
            distribution: None,
            data: None,
            n_data: default_n_data(),
            n_eval: default_n_eval(),
            kde_mode: default_kde_mode(),
            constants: None,
            output: None,
            timing: false,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text).map_err(|e| config_err("config", e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lipschitz_constant.is_finite() && self.lipschitz_constant > 0.0) {
            return Err(config_err("L", "must be finite and positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(config_err("epsilon", "must lie in (0,1]"));
        }
        if self.dims == 0 {
            return Err(config_err("dims", "must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(config_err("seeds", "need at least one seed"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(config_err("delta", "must lie in (0,1)"));
        }
        if self.n_eval == 0 {
            return Err(config_err("n_eval", "must be positive"));
        }
        if self.n_data == 0 {
            return Err(config_err("n_data", "must be positive"));
        }
        self.kde_mode
            .parse::<KdeMode>()
            .map_err(|e| config_err("kde_mode", e.to_string()))?;
        if let Some(c) = &self.constants {
            c.validate()?;
        }
        if let Some(d) = &self.distribution {
            if d.dims() != self.dims {
                return Err(config_err(
                    "distribution",
                    format!("has {} dims, config has {}", d.dims(), self.dims),
                ));
            }
            if self.mode == Mode::NwEst && !d.target.is_binary() {
                return Err(config_err("distribution.target", "kernel mode needs {0,1} labels"));
            }
        }
        Ok(())
    }

    fn effective_constants(&self) -> Result<Constants> {
        match self.constants {
            Some(c) => Ok(c),
            None => Constants::from_env(),
        }
    }
}

/// Uniform inputs labeled by a random L-Lipschitz function drawn for `seed`.
pub fn realizable_distribution(dims: usize, lipschitz_constant: f64, seed: u64) -> Result<SyntheticDistribution> {
    let mut rng = rng::stream(seed, Stage::Target);
    let function = random_lipschitz_fn(dims, lipschitz_constant, 20, ExtensionRule::Midpoint, &mut rng)?;
    SyntheticDistribution::new(Marginal::Uniform { dims }, Target::LipschitzGt { function })
}

/// Uniform inputs with labels that are 0 or 1 with equal probability; the best
/// achievable absolute error is 1/2.
pub fn pure_noise_distribution(dims: usize) -> SyntheticDistribution {
    SyntheticDistribution {
        marginal: Marginal::Uniform { dims },
        target: Target::BernoulliNoise {
            base: Box::new(Target::Constant { value: 0.5 }),
            rate: 1.0,
        },
    }
}

/// Equal-weight boxes of side 0.3 centred on points of `{0.25, 0.75}^d` (at
/// most 8 of them), labeled by the half-space `sum x_k >= d/2`.
pub fn cluster_distribution(dims: usize) -> Result<SyntheticDistribution> {
    let n = 1usize << dims.min(3);
    let components = (0..n)
        .map(|k| {
            let centre: Vec<f64> = (0..dims).map(|j| if (k >> (j % 3)) & 1 == 1 { 0.75 } else { 0.25 }).collect();
            let region = AxisBox::new(
                centre.iter().map(|c| c - 0.15).collect(),
                centre.iter().map(|c| c + 0.15).collect(),
            )?;
            Ok(MixtureComponent { region, weight: 1.0 })
        })
        .collect::<Result<Vec<_>>>()?;
    SyntheticDistribution::new(
        Marginal::Mixture { components },
        Target::HalfSpace {
            normal: vec![1.0; dims],
            offset: dims as f64 / 2.0,
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub schema_version: u32,
    pub mode: Mode,
    /// The seed, or `summary`.
    pub seed: String,
    pub estimate: f64,
    pub baseline: f64,
    pub gap: f64,
    /// 1 when `gap <= epsilon`; the success frequency in the summary row.
    pub success: f64,
    /// Labels fetched by the estimator; the largest value in the summary row.
    pub n_labels: usize,
    pub n_fresh_labels: usize,
    pub wall_time_ms: Option<f64>,
    #[serde(rename = "L")]
    pub lipschitz_constant: f64,
    pub epsilon: f64,
    pub dims: usize,
    pub delta: f64,
    pub c_pool_size: f64,
    pub c_sample_cap: f64,
    pub c_estimation_samples: f64,
    pub c_nw_samples: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub summary: ResultRow,
    /// Kernel estimates in seed order (kernel mode only).
    pub nw_estimates: Vec<NwEstimate>,
    /// Failed invariant checks (property mode only).
    pub failed_checks: Vec<PropertyCheck>,
}

impl ExperimentReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.success == 1.0)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for row in self.rows.iter().chain(std::iter::once(&self.summary)) {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Io(e.to_string()))
    }
}

struct SeedOutcome {
    estimate: f64,
    baseline: f64,
    gap: f64,
    n_labels: usize,
    n_fresh_labels: usize,
    nw: Option<NwEstimate>,
    failed: Vec<PropertyCheck>,
}

fn regression_distribution(config: &ExperimentConfig, seed: u64) -> Result<SyntheticDistribution> {
    match &config.distribution {
        Some(d) => Ok(d.clone()),
        None => realizable_distribution(config.dims, config.lipschitz_constant, seed),
    }
}

fn run_local_query(config: &ExperimentConfig, seed: u64, constants: &Constants) -> Result<SeedOutcome> {
    let dist = regression_distribution(config, seed)?;
    let session = build_session(config.lipschitz_constant, config.epsilon, config.dims, &dist, seed, constants)?;
    let eval = draw_pairs(&dist, config.n_eval, seed);
    let estimate = mean_residual(&session, &eval)?;
    let baseline = oracle_error(config.lipschitz_constant, config.dims, &eval)?;
    Ok(SeedOutcome {
        estimate,
        baseline,
        gap: estimate - baseline,
        n_labels: session.budget_report().distinct_labels,
        n_fresh_labels: 0,
        nw: None,
        failed: Vec::new(),
    })
}

fn oracle_pairs(dist: &SyntheticDistribution, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = rng::stream(seed, Stage::OracleSample);
    (0..n).map(|_| crate::synthetic::sample_pair(dist, &mut rng)).collect()
}

fn run_error_est(config: &ExperimentConfig, seed: u64, constants: &Constants) -> Result<SeedOutcome> {
    let dist = regression_distribution(config, seed)?;
    let est = estimate_error(config.lipschitz_constant, config.epsilon, config.dims, &dist, seed, constants)?;
    let baseline = oracle_error(config.lipschitz_constant, config.dims, &oracle_pairs(&dist, config.n_eval, seed))?;
    Ok(SeedOutcome {
        estimate: est.estimate,
        baseline,
        gap: (est.estimate - baseline).abs(),
        n_labels: est.n_pool_labels,
        n_fresh_labels: est.n_fresh_labels,
        nw: None,
        failed: Vec::new(),
    })
}

type NwInputs = (Vec<Vec<f64>>, Arc<dyn LabelSource>);

/// Dataset points and a label source for the kernel mode.
fn nw_inputs(config: &ExperimentConfig, dist: &SyntheticDistribution, seed: u64) -> Result<NwInputs> {
    if let Some(path) = &config.data {
        let data = read_dataset(path)?;
        if data.dims() != config.dims {
            return Err(config_err("data", format!("has {} dims, config has {}", data.dims(), config.dims)));
        }
        let source: Arc<dyn LabelSource> = match data.labels {
            Some(labels) => Arc::new(FixedLabels(labels)),
            None => Arc::new(DistributionLabels::new(dist.clone(), seed)),
        };
        return Ok((data.points, source));
    }
    let mut rng = rng::stream(seed, Stage::Dataset);
    let points = (0..config.n_data).map(|_| dist.sample_x(&mut rng)).collect();
    Ok((points, Arc::new(DistributionLabels::new(dist.clone(), seed))))
}

fn run_nw_est(config: &ExperimentConfig, seed: u64, constants: &Constants) -> Result<SeedOutcome> {
    let dist = match &config.distribution {
        Some(d) => d.clone(),
        None => cluster_distribution(config.dims)?,
    };
    let kde_mode: KdeMode = config.kde_mode.parse()?;
    let (points, source) = nw_inputs(config, &dist, seed)?;
    // the baseline reads every label; the estimator gets its own memo
    let labels: Vec<f64> = points.iter().enumerate().map(|(i, p)| source.label(i, p)).collect();
    let dataset = NwDataset::new(points.clone(), source)?;
    let est = nw_error_with_constants(&dataset, &dist, config.epsilon, config.delta, seed, kde_mode, constants)?;
    let eval = oracle_pairs(&dist, config.n_eval, seed);
    let net = epsilon_net(config.dims, config.epsilon)?;
    let baseline = exact_losses(&net, &points, &labels, &eval)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    Ok(SeedOutcome {
        estimate: est.value,
        baseline,
        gap: (est.value - baseline).abs(),
        n_labels: est.n_labels,
        n_fresh_labels: est.n_draws,
        nw: Some(est),
        failed: Vec::new(),
    })
}

fn run_properties(seed: u64) -> Result<SeedOutcome> {
    let checks = run_suite(seed);
    let passed = checks.iter().filter(|c| c.passed).count();
    let failed: Vec<PropertyCheck> = checks.into_iter().filter(|c| !c.passed).collect();
    let total = passed + failed.len();
    Ok(SeedOutcome {
        estimate: passed as f64 / total as f64,
        baseline: 1.0,
        // `success` compares against epsilon, so any failure must exceed it
        gap: if failed.is_empty() { 0.0 } else { f64::INFINITY },
        n_labels: 0,
        n_fresh_labels: 0,
        nw: None,
        failed,
    })
}

/// Runs every seed of `config`. Seeds run in parallel; rows come back in seed
/// order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let constants = config.effective_constants()?;
    let outcomes = config
        .seeds
        .par_iter()
        .map(|&seed| {
            let start = Instant::now();
            let outcome = match config.mode {
                Mode::LocalQuery => run_local_query(config, seed, &constants),
                Mode::ErrorEst => run_error_est(config, seed, &constants),
                Mode::NwEst => run_nw_est(config, seed, &constants),
                Mode::PropertySuite => run_properties(seed),
            }?;
            Ok((seed, outcome, start.elapsed().as_secs_f64() * 1e3))
        })
        .collect::<Result<Vec<_>>>()?;

    let row = |seed: String, estimate, baseline, gap, success, n_labels, n_fresh_labels, wall: Option<f64>| ResultRow {
        schema_version: RESULT_SCHEMA_VERSION,
        mode: config.mode,
        seed,
        estimate,
        baseline,
        gap,
        success,
        n_labels,
        n_fresh_labels,
        wall_time_ms: wall,
        lipschitz_constant: config.lipschitz_constant,
        epsilon: config.epsilon,
        dims: config.dims,
        delta: config.delta,
        c_pool_size: constants.pool_size,
        c_sample_cap: constants.sample_cap,
        c_estimation_samples: constants.estimation_samples,
        c_nw_samples: constants.nw_samples,
    };

    let mut rows = Vec::with_capacity(outcomes.len());
    let mut nw_estimates = Vec::new();
    let mut failed_checks = Vec::new();
    for (seed, o, ms) in outcomes {
        let ok = if o.gap <= config.epsilon { 1.0 } else { 0.0 };
        rows.push(row(
            seed.to_string(),
            o.estimate,
            o.baseline,
            o.gap,
            ok,
            o.n_labels,
            o.n_fresh_labels,
            config.timing.then_some(ms),
        ));
        nw_estimates.extend(o.nw);
        failed_checks.extend(o.failed);
    }
    let n = rows.len() as f64;
    let mean = |f: fn(&ResultRow) -> f64| rows.iter().map(f).sum::<f64>() / n;
    let summary = row(
        "summary".into(),
        mean(|r| r.estimate),
        mean(|r| r.baseline),
        mean(|r| r.gap),
        mean(|r| r.success),
        rows.iter().map(|r| r.n_labels).max().unwrap_or(0),
        rows.iter().map(|r| r.n_fresh_labels).max().unwrap_or(0),
        config.timing.then(|| rows.iter().filter_map(|r| r.wall_time_ms).sum()),
    );
    Ok(ExperimentReport {
        rows,
        summary,
        nw_estimates,
        failed_checks,
    })
}
