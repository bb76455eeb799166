//! Local queries against one implicit global Lipschitz function.
//!
//! A [`QuerySession`] binds a partition to an unlabeled pool and a label
//! source. Each query fits (once) the ERM of the long cells it depends on,
//! fetching only the labels of the pool points inside them, and answers with
//! the value of a single L-Lipschitz function that is never materialized.
//!
//! * One dimension ([`Scheme::Interval`]): inside a long interval the answer is
//!   the cell's ERM; inside a short interval it is the linear interpolation
//!   between the neighbouring ERMs evaluated at the shared boundaries.
//! * Boxes ([`Scheme::Grid`]): inside the extension box of a long box the answer
//!   is that box's ERM extended with value 1 on the midplanes of the adjacent
//!   short slabs; everywhere else it is 1.

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::AxisBox;
use crate::lipschitz::{erm_fit, AnchoredLipschitzFn, ErmProblem, ExtensionRule};
use crate::partition::{CellKind, IntervalKind, Partition, Scheme};
use crate::rng::{self, Stage};
use crate::synthetic::{LabeledDistribution, PointSampler};

pub const CHECKPOINT_SCHEMA_VERSION: u32 = 1;

/// Coordinates this close to a midplane are treated as lying on it.
const MIDPLANE_TOLERANCE: f64 = 1e-12;

/// Unlabeled sample points, in a fixed order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnlabeledPool {
    dims: usize,
    points: Vec<Vec<f64>>,
    #[serde(default)]
    seed: Option<u64>,
    #[serde(default)]
    sampler_id: Option<String>,
}

impl UnlabeledPool {
    pub fn new(dims: usize, points: Vec<Vec<f64>>) -> Result<Self> {
        if dims == 0 {
            return Err(invalid("dims", "must be at least 1"));
        }
        for p in &points {
            if p.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: p.len(),
                });
            }
            for (index, &value) in p.iter().enumerate() {
                if !(0.0..=1.0).contains(&value) {
                    return Err(Error::OutOfDomain { index, value });
                }
            }
        }
        Ok(Self {
            dims,
            points,
            seed: None,
            sampler_id: None,
        })
    }

    /// Draws `n` points from `sampler` on the pool stream of `seed`.
    pub fn sample<S: PointSampler + ?Sized>(sampler: &S, n: usize, seed: u64, sampler_id: &str) -> Result<Self> {
        let mut rng = rng::stream(seed, Stage::Pool);
        let points = (0..n).map(|_| sampler.sample_x(&mut rng)).collect();
        let mut pool = Self::new(sampler.dims(), points)?;
        pool.seed = Some(seed);
        pool.sampler_id = Some(sampler_id.to_owned());
        Ok(pool)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn sampler_id(&self) -> Option<&str> {
        self.sampler_id.as_deref()
    }
}

/// Where pool labels come from. `index` is the position in the pool.
pub trait LabelSource: Send + Sync {
    fn label(&self, index: usize, point: &[f64]) -> f64;
}

impl<F> LabelSource for F
where
    F: Fn(usize, &[f64]) -> f64 + Send + Sync,
{
    fn label(&self, index: usize, point: &[f64]) -> f64 {
        self(index, point)
    }
}

/// Labels drawn from a distribution's label rule, with one random stream per
/// pool index so a label does not depend on when it is requested.
pub struct DistributionLabels<D> {
    distribution: D,
    seed: u64,
}

impl<D: LabeledDistribution> DistributionLabels<D> {
    pub fn new(distribution: D, seed: u64) -> Self {
        Self { distribution, seed }
    }
}

impl<D: LabeledDistribution> LabelSource for DistributionLabels<D> {
    fn label(&self, index: usize, point: &[f64]) -> f64 {
        let mut rng = rng::item_stream(self.seed, Stage::PoolLabels, index as u64);
        self.distribution.label(point, &mut rng)
    }
}

/// A fixed label per pool index.
pub struct FixedLabels(pub Vec<f64>);

impl LabelSource for FixedLabels {
    fn label(&self, index: usize, _point: &[f64]) -> f64 {
        self.0[index]
    }
}

/// Source for sessions whose every needed label is already memoized.
struct NoLabels;

impl LabelSource for NoLabels {
    fn label(&self, _index: usize, _point: &[f64]) -> f64 {
        f64::NAN
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRecord {
    pub point: Vec<f64>,
    pub new_labels: usize,
}

/// Memoizing access to pool labels. Each label is requested from the source
/// at most once per pool index; later requests are served from the memo.
pub struct LabelOracle {
    source: Arc<dyn LabelSource>,
    memo: Vec<OnceLock<f64>>,
    distinct: AtomicUsize,
    log: Mutex<Vec<QueryRecord>>,
}

impl LabelOracle {
    pub fn new(source: Arc<dyn LabelSource>, pool_size: usize) -> Self {
        Self {
            source,
            memo: (0..pool_size).map(|_| OnceLock::new()).collect(),
            distinct: AtomicUsize::new(0),
            log: Mutex::new(Vec::new()),
        }
    }

    /// Label of pool point `index`, and whether it was fetched by this call.
    pub fn fetch(&self, index: usize, point: &[f64]) -> Result<(f64, bool)> {
        if let Some(&y) = self.memo[index].get() {
            return Ok((y, false));
        }
        let y = self.source.label(index, point);
        if !(0.0..=1.0).contains(&y) {
            return Err(invalid("label", format!("source returned {y} for pool point {index}")));
        }
        self.store(index, y)
    }

    fn store(&self, index: usize, y: f64) -> Result<(f64, bool)> {
        let mut fresh = false;
        let v = *self.memo[index].get_or_init(|| {
            fresh = true;
            y
        });
        if fresh {
            self.distinct.fetch_add(1, Ordering::SeqCst);
        }
        Ok((v, fresh))
    }

    pub fn distinct_queries(&self) -> usize {
        self.distinct.load(Ordering::SeqCst)
    }

    pub fn memoized(&self, index: usize) -> Option<f64> {
        self.memo[index].get().copied()
    }

    pub fn log(&self) -> Vec<QueryRecord> {
        self.log.lock().expect("query log poisoned").clone()
    }

    fn record(&self, point: &[f64], new_labels: usize) {
        self.log.lock().expect("query log poisoned").push(QueryRecord {
            point: point.to_vec(),
            new_labels,
        });
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BudgetReport {
    pub distinct_labels: usize,
    /// Labels fetched per cell, keyed by interval indices.
    pub per_cell: BTreeMap<Vec<usize>, usize>,
}

type FitSlot = Arc<OnceLock<Result<Arc<AnchoredLipschitzFn>>>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedCell {
    pub cell: Vec<usize>,
    pub function: AnchoredLipschitzFn,
}

/// Everything needed to rebuild a session with identical answers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema_version: u32,
    pub partition: Partition,
    pub pool: UnlabeledPool,
    pub sample_cap: usize,
    pub extension_rule: ExtensionRule,
    pub labels: Vec<(usize, f64)>,
    pub cells: Vec<CachedCell>,
}

/// A partition, a pool, a label oracle and the per-cell ERM cache.
pub struct QuerySession {
    partition: Partition,
    pool: UnlabeledPool,
    oracle: LabelOracle,
    sample_cap: usize,
    rule: ExtensionRule,
    bucket_keys: Vec<Vec<usize>>,
    buckets: HashMap<Vec<usize>, Vec<usize>>,
    point_bucket: Vec<usize>,
    cache: Mutex<HashMap<Vec<usize>, FitSlot>>,
}

/// Resolution of one coordinate for the box learner.
enum Axis {
    Long(usize),
    Outside,
}

impl QuerySession {
    pub fn new(partition: Partition, pool: UnlabeledPool, source: Arc<dyn LabelSource>, sample_cap: usize) -> Result<Self> {
        if partition.dims() != pool.dims() {
            return Err(Error::DimensionMismatch {
                expected: partition.dims(),
                got: pool.dims(),
            });
        }
        if sample_cap == 0 {
            return Err(invalid("sample_cap", "must be at least 1"));
        }
        let mut bucket_keys: Vec<Vec<usize>> = Vec::new();
        let mut buckets: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
        let mut point_bucket = Vec::with_capacity(pool.len());
        let mut ids: HashMap<Vec<usize>, usize> = HashMap::new();
        for (i, p) in pool.points().iter().enumerate() {
            let cell = partition.locate_unchecked(p);
            let id = *ids.entry(cell.index.clone()).or_insert_with(|| {
                bucket_keys.push(cell.index.clone());
                bucket_keys.len() - 1
            });
            point_bucket.push(id);
            buckets.entry(cell.index).or_default().push(i);
        }
        let oracle = LabelOracle::new(source, pool.len());
        Ok(Self {
            partition,
            pool,
            oracle,
            sample_cap,
            rule: ExtensionRule::Midpoint,
            bucket_keys,
            buckets,
            point_bucket,
            cache: Mutex::new(HashMap::new()),
        })
    }

    /// Rule used to evaluate long-cell ERMs between their anchors.
    pub fn with_extension_rule(mut self, rule: ExtensionRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn pool(&self) -> &UnlabeledPool {
        &self.pool
    }

    pub fn oracle(&self) -> &LabelOracle {
        &self.oracle
    }

    pub fn sample_cap(&self) -> usize {
        self.sample_cap
    }

    pub fn extension_rule(&self) -> ExtensionRule {
        self.rule
    }

    /// Pool indices in a cell, in pool order (before capping).
    pub fn bucket(&self, cell: &[usize]) -> &[usize] {
        self.buckets.get(cell).map_or(&[], Vec::as_slice)
    }

    /// The ERM of a long cell, fitted on first use. Returns the function and
    /// the number of labels fetched by this call.
    pub fn cell_fit(&self, cell: &[usize]) -> Result<(Arc<AnchoredLipschitzFn>, usize)> {
        let slot = {
            let mut cache = self.cache.lock().expect("cell cache poisoned");
            cache.entry(cell.to_vec()).or_default().clone()
        };
        let mut fetched = 0;
        let fit = slot.get_or_init(|| self.fit(cell, &mut fetched));
        fit.clone().map(|f| (f, fetched))
    }

    fn fit(&self, cell: &[usize], fetched: &mut usize) -> Result<Arc<AnchoredLipschitzFn>> {
        let l = self.partition.lipschitz_constant();
        let members = self.bucket(cell);
        if members.is_empty() {
            return Ok(Arc::new(AnchoredLipschitzFn::empty(self.partition.dims(), l, self.rule)?));
        }
        let mut samples = Vec::with_capacity(members.len().min(self.sample_cap));
        for &i in members.iter().take(self.sample_cap) {
            let point = &self.pool.points()[i];
            let (y, fresh) = self.oracle.fetch(i, point)?;
            *fetched += fresh as usize;
            samples.push((point.clone(), y));
        }
        let region = self.partition.cell_box(&self.partition.cell(cell.to_vec()));
        let problem = ErmProblem::new(samples, l, region)?;
        Ok(Arc::new(erm_fit(&problem)?.with_rule(self.rule)))
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        self.partition.locate(x).map(|_| ())
    }

    /// Answers a query with the procedure matching the partition's scheme.
    pub fn query(&self, x: &[f64]) -> Result<f64> {
        match self.partition.scheme() {
            Scheme::Interval => {
                if x.len() != 1 {
                    return Err(Error::DimensionMismatch {
                        expected: 1,
                        got: x.len(),
                    });
                }
                self.query_1d(x[0])
            }
            Scheme::Grid => self.query_dd(x),
        }
    }

    fn long_value(&self, fit: &AnchoredLipschitzFn, x: &[f64]) -> f64 {
        if fit.is_empty() {
            0.5
        } else {
            fit.evaluate_with(x, self.rule)
        }
    }

    /// One-dimensional query on an interval-scheme partition.
    pub fn query_1d(&self, x: f64) -> Result<f64> {
        if self.partition.scheme() != Scheme::Interval || self.partition.dims() != 1 {
            return Err(Error::PreconditionViolated(
                "query_1d needs a one-dimensional interval partition".into(),
            ));
        }
        self.check_point(&[x])?;
        let p = &self.partition;
        let i = p.locate_coordinate(0, x);
        let mut fetched = 0;
        let value = match p.interval_kind(0, i) {
            IntervalKind::Long => {
                let (fit, n) = self.cell_fit(&[i])?;
                fetched += n;
                self.long_value(&fit, &[x])
            }
            IntervalKind::Short => {
                let (left, right) = p.interval(0, i);
                let mut edge = |j: usize, at: f64| -> Result<f64> {
                    let (fit, n) = self.cell_fit(&[j])?;
                    fetched += n;
                    Ok(self.long_value(&fit, &[at]))
                };
                let below = if i > 0 { Some(edge(i - 1, left)?) } else { None };
                let above = if i + 1 < p.n_intervals(0) {
                    Some(edge(i + 1, right)?)
                } else {
                    None
                };
                let (vl, vu) = match (below, above) {
                    (Some(a), Some(b)) => (a, b),
                    (Some(a), None) => (a, a),
                    (None, Some(b)) => (b, b),
                    (None, None) => (0.5, 0.5),
                };
                (vl + (x - left) * (vu - vl) / (right - left)).clamp(0.0, 1.0)
            }
        };
        self.oracle.record(&[x], fetched);
        Ok(value)
    }

    fn resolve_axis(&self, dim: usize, v: f64) -> Axis {
        let p = &self.partition;
        let k = p.locate_coordinate(dim, v);
        if p.interval_kind(dim, k) == IntervalKind::Long {
            return Axis::Long(k);
        }
        let (lo, _) = p.interval(dim, k);
        let mid = lo + p.short_len() / 2.0;
        if v < mid - MIDPLANE_TOLERANCE && k > 0 {
            Axis::Long(k - 1)
        } else if v > mid + MIDPLANE_TOLERANCE && k + 1 < p.n_intervals(dim) {
            Axis::Long(k + 1)
        } else {
            Axis::Outside
        }
    }

    /// Query on a grid-scheme partition of any dimension.
    pub fn query_dd(&self, x: &[f64]) -> Result<f64> {
        if self.partition.scheme() != Scheme::Grid {
            return Err(Error::PreconditionViolated(
                "query_dd needs a grid partition".into(),
            ));
        }
        self.check_point(x)?;
        let mut index = Vec::with_capacity(x.len());
        for (d, &v) in x.iter().enumerate() {
            match self.resolve_axis(d, v) {
                Axis::Long(k) => index.push(k),
                Axis::Outside => {
                    self.oracle.record(x, 0);
                    return Ok(1.0);
                }
            }
        }
        let (fit, fetched) = self.cell_fit(&index)?;
        let cell = self.partition.cell(index);
        debug_assert_eq!(cell.kind, CellKind::LongBox);
        let distance = self.partition.constraint_distance_unchecked(&cell, x);
        self.oracle.record(x, fetched);
        Ok(fit.evaluate_constrained(x, distance, 1.0))
    }

    pub fn budget_report(&self) -> BudgetReport {
        let mut per_cell: BTreeMap<Vec<usize>, usize> = BTreeMap::new();
        for (i, &b) in self.point_bucket.iter().enumerate() {
            if self.oracle.memoized(i).is_some() {
                *per_cell.entry(self.bucket_keys[b].clone()).or_default() += 1;
            }
        }
        BudgetReport {
            distinct_labels: self.oracle.distinct_queries(),
            per_cell,
        }
    }

    /// Extension box of a long cell, for callers inspecting the geometry.
    pub fn extension_box(&self, cell: &[usize]) -> Result<AxisBox> {
        self.partition.extension_box(&self.partition.cell(cell.to_vec()))
    }

    pub fn checkpoint(&self) -> Checkpoint {
        let labels = (0..self.pool.len())
            .filter_map(|i| self.oracle.memoized(i).map(|y| (i, y)))
            .collect();
        let mut cells: Vec<CachedCell> = {
            let cache = self.cache.lock().expect("cell cache poisoned");
            cache
                .iter()
                .filter_map(|(k, slot)| match slot.get() {
                    Some(Ok(f)) => Some(CachedCell {
                        cell: k.clone(),
                        function: (**f).clone(),
                    }),
                    _ => None,
                })
                .collect()
        };
        cells.sort_by(|a, b| a.cell.cmp(&b.cell));
        Checkpoint {
            schema_version: CHECKPOINT_SCHEMA_VERSION,
            partition: self.partition.clone(),
            pool: self.pool.clone(),
            sample_cap: self.sample_cap,
            extension_rule: self.rule,
            labels,
            cells,
        }
    }

    /// Rebuilds a session from a checkpoint. Labels not in the checkpoint are
    /// requested from `source` when needed; without a source, queries that
    /// need a missing label fail.
    pub fn restore(checkpoint: Checkpoint, source: Option<Arc<dyn LabelSource>>) -> Result<Self> {
        if checkpoint.schema_version != CHECKPOINT_SCHEMA_VERSION {
            return Err(Error::Parse(format!(
                "unsupported checkpoint schema version {}",
                checkpoint.schema_version
            )));
        }
        let source = source.unwrap_or_else(|| Arc::new(NoLabels));
        let session = Self::new(checkpoint.partition, checkpoint.pool, source, checkpoint.sample_cap)?
            .with_extension_rule(checkpoint.extension_rule);
        for (i, y) in checkpoint.labels {
            if i >= session.pool.len() || !(0.0..=1.0).contains(&y) {
                return Err(Error::Parse(format!("bad checkpoint label ({i}, {y})")));
            }
            session.oracle.store(i, y)?;
        }
        {
            let mut cache = session.cache.lock().expect("cell cache poisoned");
            for c in checkpoint.cells {
                let cell = session.partition.cell(c.cell.clone());
                if c.cell.len() != session.partition.dims()
                    || c.cell.iter().enumerate().any(|(d, &k)| k >= session.partition.n_intervals(d))
                    || cell.kind != CellKind::LongBox
                {
                    return Err(Error::Parse(format!("checkpoint cell {:?} is not a long cell", c.cell)));
                }
                let slot: FitSlot = Arc::new(OnceLock::new());
                let _ = slot.set(Ok(Arc::new(c.function)));
                cache.insert(c.cell, slot);
            }
        }
        Ok(session)
    }

    pub fn save_checkpoint(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string(&self.checkpoint())?)?;
        Ok(())
    }

    pub fn load_checkpoint(path: &std::path::Path, source: Option<Arc<dyn LabelSource>>) -> Result<Self> {
        let checkpoint: Checkpoint = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Self::restore(checkpoint, source)
    }
}

/// Builds a session; see [`QuerySession::new`].
pub fn new_session(
    partition: Partition,
    pool: UnlabeledPool,
    source: Arc<dyn LabelSource>,
    sample_cap: usize,
) -> Result<QuerySession> {
    QuerySession::new(partition, pool, source, sample_cap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::Partition;

    fn partition_1d() -> Partition {
        Partition::with_offsets(10.0, 0.5, 1, Scheme::Interval, &[2]).unwrap()
    }

    fn pool_1d(points: &[f64]) -> UnlabeledPool {
        UnlabeledPool::new(1, points.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    fn constant(c: f64) -> Arc<dyn LabelSource> {
        Arc::new(move |_: usize, _: &[f64]| c)
    }

    #[test]
    fn empty_pool_session() {
        let s = QuerySession::new(partition_1d(), pool_1d(&[]), constant(0.3), 5).unwrap();
        assert_eq!(s.budget_report().distinct_labels, 0);
        assert_eq!(s.query_1d(0.4).unwrap(), 0.5);
        assert_eq!(s.query_1d(0.25).unwrap(), 0.5);
    }

    #[test]
    fn constant_labels_give_constant_answers() {
        let pts: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
        let s = QuerySession::new(partition_1d(), pool_1d(&pts), constant(0.3), 50).unwrap();
        for k in 0..=100 {
            assert!((s.query_1d(k as f64 / 100.0).unwrap() - 0.3).abs() < 1e-12);
        }
    }

    #[test]
    fn repeated_query_hits_cache() {
        let pts: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let s = QuerySession::new(partition_1d(), pool_1d(&pts), constant(0.7), 50).unwrap();
        let a = s.query_1d(0.4).unwrap();
        let n = s.budget_report().distinct_labels;
        assert_eq!(n, s.bucket(&[2]).len());
        assert_eq!(s.query_1d(0.4).unwrap(), a);
        assert_eq!(s.budget_report().distinct_labels, n);
        let log = s.oracle().log();
        assert_eq!(log[0].new_labels, n);
        assert_eq!(log[1].new_labels, 0);
    }

    #[test]
    fn short_query_fetches_both_neighbours() {
        let pts: Vec<f64> = (0..100).map(|i| i as f64 / 99.0).collect();
        let s = QuerySession::new(partition_1d(), pool_1d(&pts), constant(0.7), 50).unwrap();
        s.query_1d(0.55).unwrap();
        let report = s.budget_report();
        assert_eq!(report.distinct_labels, s.bucket(&[2]).len() + s.bucket(&[4]).len());
        assert_eq!(report.per_cell.len(), 2);
    }

    #[test]
    fn short_midpoint_averages_neighbours() {
        // left long cell [0.3,0.5] labeled 0.2, right long cell [0.6,0.8] labeled 0.6
        let src: Arc<dyn LabelSource> = Arc::new(|_: usize, x: &[f64]| if x[0] < 0.55 { 0.2 } else { 0.6 });
        let s = QuerySession::new(partition_1d(), pool_1d(&[0.35, 0.45, 0.65, 0.75]), src, 10).unwrap();
        let vl = s.cell_fit(&[2]).unwrap().0.evaluate(&[0.5]);
        let vu = s.cell_fit(&[4]).unwrap().0.evaluate(&[0.6]);
        assert!((s.query_1d(0.55).unwrap() - (vl + vu) / 2.0).abs() < 1e-12);
        assert!((s.query_1d(0.5).unwrap() - vl).abs() < 1e-12);
    }

    #[test]
    fn cap_uses_first_points_in_pool_order() {
        let pts = [0.31, 0.32, 0.33, 0.34, 0.35, 0.36, 0.37, 0.38, 0.39, 0.41];
        let s = QuerySession::new(partition_1d(), pool_1d(&pts), constant(0.5), 3).unwrap();
        let (fit, fetched) = s.cell_fit(&[2]).unwrap();
        assert_eq!(fetched, 3);
        let anchors: Vec<f64> = fit.anchors().iter().map(|a| a.point[0]).collect();
        assert_eq!(anchors, vec![0.31, 0.32, 0.33]);
    }

    #[test]
    fn bucket_sizes_sum_to_pool() {
        let pool = UnlabeledPool::sample(&crate::synthetic::Marginal::Uniform { dims: 1 }, 1000, 3, "uniform").unwrap();
        let s = QuerySession::new(partition_1d(), pool, constant(0.5), 10).unwrap();
        let total: usize = (0..s.partition().n_intervals(0)).map(|i| s.bucket(&[i]).len()).sum();
        assert_eq!(total, 1000);
    }

    fn grid_session(labels: f64, cap: usize) -> QuerySession {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[2, 2]).unwrap();
        let pool = UnlabeledPool::sample(&crate::synthetic::Marginal::Uniform { dims: 2 }, 400, 8, "uniform").unwrap();
        QuerySession::new(p, pool, constant(labels), cap).unwrap()
    }

    #[test]
    fn grid_edge_slab_and_midplane_are_one() {
        let s = grid_session(0.2, 30);
        // [0.9,1.0] is a short slab with no long neighbour above its midplane
        assert_eq!(s.query_dd(&[0.97, 0.4]).unwrap(), 1.0);
        // midplane between [0.3,0.55] and [0.65,0.9]
        assert_eq!(s.query_dd(&[0.6, 0.4]).unwrap(), 1.0);
        let inside = s.pool().points()[s.bucket(&[2, 2])[0]].clone();
        assert!((s.query_dd(&inside).unwrap() - 0.2).abs() < 1e-12);
    }

    #[test]
    fn grid_empty_box_is_one() {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[2, 2]).unwrap();
        let pool = UnlabeledPool::new(2, vec![vec![0.1, 0.1]]).unwrap();
        let s = QuerySession::new(p, pool, constant(0.0), 5).unwrap();
        assert_eq!(s.query_dd(&[0.4, 0.4]).unwrap(), 1.0);
        assert_eq!(s.query_dd(&[0.1, 0.1]).unwrap(), 0.0);
        assert_eq!(s.budget_report().distinct_labels, 1);
    }

    #[test]
    fn schemes_are_not_interchangeable() {
        let s = grid_session(0.2, 30);
        assert!(matches!(s.query_1d(0.3), Err(Error::PreconditionViolated(_))));
        let t = QuerySession::new(partition_1d(), pool_1d(&[0.3]), constant(0.5), 1).unwrap();
        assert!(matches!(t.query_dd(&[0.3]), Err(Error::PreconditionViolated(_))));
        assert!(matches!(t.query_1d(1.5), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let s = grid_session(0.35, 30);
        let probes: Vec<Vec<f64>> = (0..50).map(|i| vec![(i as f64 * 0.0193) % 1.0, (i as f64 * 0.0377) % 1.0]).collect();
        let before: Vec<f64> = probes.iter().map(|x| s.query_dd(x).unwrap()).collect();
        let text = serde_json::to_string(&s.checkpoint()).unwrap();
        let restored = QuerySession::restore(serde_json::from_str(&text).unwrap(), None).unwrap();
        assert_eq!(restored.budget_report(), s.budget_report());
        for (x, b) in probes.iter().zip(&before) {
            assert_eq!(restored.query_dd(x).unwrap().to_bits(), b.to_bits());
        }
    }
}
