//! Error of Nadaraya-Watson prediction under diagonal metric transforms.
//!
//! With kernel `K_A(x, y) = 1 / (1 + |A(x - y)|_2^2)` and dataset `S`, the
//! prediction at `x` is the `p_{S,A}(., x)`-weighted average of the dataset
//! labels, and its loss is `E_x sum_i p_{S,A}(x_i, x) |f(x_i) - f(x)|`.
//!
//! [`nw_error`] estimates the smallest loss over diagonal transforms with
//! eigenvalues in `[1,2]` using `O(d log(1/eps) + log(1/delta)) / eps^2`
//! labels, independent of `|S|`: neighbours are drawn once under the identity
//! transform and reweighted by `p_{S,A} / p_{S,I}` for every transform of a
//! geometric grid.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::seq::index;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{invalid, Error, Result};
use crate::estimation::order_free_sum;
use crate::learner::{FixedLabels, LabelOracle, LabelSource};
use crate::rng::{self, Stage};
use crate::synthetic::LabeledDistribution;

/// Eigenvalue range of the transform class.
pub const EIGEN_LO: f64 = 1.0;
pub const EIGEN_HI: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalTransform {
    eigenvalues: Vec<f64>,
}

impl DiagonalTransform {
    /// A transform with every eigenvalue in `[1,2]`.
    pub fn new(eigenvalues: Vec<f64>) -> Result<Self> {
        Self::with_bounds(eigenvalues, EIGEN_LO, EIGEN_HI)
    }

    /// A transform with every eigenvalue in `[lo, hi]`.
    pub fn with_bounds(eigenvalues: Vec<f64>, lo: f64, hi: f64) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(invalid("eigenvalues", "need at least one"));
        }
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(invalid("eigenvalue bounds", format!("need 0 < lo <= hi, got [{lo}, {hi}]")));
        }
        if let Some(e) = eigenvalues.iter().find(|e| !(lo..=hi).contains(*e)) {
            return Err(invalid("eigenvalues", format!("{e} outside [{lo}, {hi}]")));
        }
        Ok(Self { eigenvalues })
    }

    pub fn identity(dims: usize) -> Self {
        Self {
            eigenvalues: vec![1.0; dims],
        }
    }

    pub fn dims(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

#[inline]
fn kernel_unchecked(a: &[f64], x: &[f64], y: &[f64]) -> f64 {
    let mut s = 0.0;
    for k in 0..a.len() {
        let t = a[k] * (x[k] - y[k]);
        s += t * t;
    }
    1.0 / (1.0 + s)
}

/// `K_A(x, y) = 1 / (1 + |A(x - y)|_2^2)`.
pub fn kernel(a: &DiagonalTransform, x: &[f64], y: &[f64]) -> Result<f64> {
    for v in [x, y] {
        if v.len() != a.dims() {
            return Err(Error::DimensionMismatch {
                expected: a.dims(),
                got: v.len(),
            });
        }
    }
    Ok(kernel_unchecked(&a.eigenvalues, x, y))
}

fn check_points(a: &DiagonalTransform, points: &[Vec<f64>], q: &[f64]) -> Result<()> {
    if points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    for v in points.iter().map(Vec::as_slice).chain(std::iter::once(q)) {
        if v.len() != a.dims() {
            return Err(Error::DimensionMismatch {
                expected: a.dims(),
                got: v.len(),
            });
        }
    }
    Ok(())
}

fn kernel_sum(a: &[f64], points: &[Vec<f64>], q: &[f64]) -> f64 {
    points.iter().map(|p| kernel_unchecked(a, q, p)).sum()
}

/// `p_{S,A}(x_i, q)` for every dataset point `x_i`.
pub fn prediction_probs(a: &DiagonalTransform, points: &[Vec<f64>], q: &[f64]) -> Result<Vec<f64>> {
    check_points(a, points, q)?;
    let k: Vec<f64> = points.iter().map(|p| kernel_unchecked(&a.eigenvalues, q, p)).collect();
    let total: f64 = k.iter().sum();
    Ok(k.into_iter().map(|v| v / total).collect())
}

/// Geometric grid `{lo, lo(1+eps), lo(1+eps)^2, ...}` below `hi`, with `hi`
/// appended.
pub fn eigenvalue_grid(epsilon: f64, lo: f64, hi: f64) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    let mut grid = Vec::new();
    for k in 0.. {
        let v = lo * (1.0 + epsilon).powi(k);
        if v >= hi * (1.0 - 1e-12) {
            break;
        }
        grid.push(v);
    }
    grid.push(hi);
    Ok(grid)
}

fn product_net(dims: usize, grid: &[f64]) -> Vec<DiagonalTransform> {
    let mut net = vec![Vec::with_capacity(dims)];
    for _ in 0..dims {
        net = net
            .into_iter()
            .flat_map(|prefix: Vec<f64>| {
                grid.iter().map(move |&g| {
                    let mut e = prefix.clone();
                    e.push(g);
                    e
                })
            })
            .collect();
    }
    net.into_iter().map(|eigenvalues| DiagonalTransform { eigenvalues }).collect()
}

/// All diagonal transforms whose eigenvalues lie on the `[1,2]` grid of
/// [`eigenvalue_grid`]. The last dimension varies fastest.
pub fn epsilon_net(dims: usize, epsilon: f64) -> Result<Vec<DiagonalTransform>> {
    if dims == 0 {
        return Err(invalid("dims", "must be at least 1"));
    }
    Ok(product_net(dims, &eigenvalue_grid(epsilon, EIGEN_LO, EIGEN_HI)?))
}

/// Largest possible `p_{S,A} / p_{S,I}` for eigenvalues of `A` in `[lo, hi]`.
/// Equals 16 for the standard range.
pub fn importance_ratio_bound(lo: f64, hi: f64) -> f64 {
    (hi.max(1.0) / lo.min(1.0)).powi(4)
}

/// A dataset whose binary labels are fetched on demand and memoized.
pub struct NwDataset {
    dims: usize,
    points: Vec<Vec<f64>>,
    oracle: LabelOracle,
}

impl NwDataset {
    pub fn new(points: Vec<Vec<f64>>, source: Arc<dyn LabelSource>) -> Result<Self> {
        let dims = points.first().ok_or(Error::EmptyDataset)?.len();
        if dims == 0 {
            return Err(invalid("points", "need at least one coordinate"));
        }
        if let Some(p) = points.iter().find(|p| p.len() != dims) {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: p.len(),
            });
        }
        let oracle = LabelOracle::new(source, points.len());
        Ok(Self { dims, points, oracle })
    }

    /// A dataset with all labels given up front (they still count when read).
    pub fn labeled(points: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if labels.len() != points.len() {
            return Err(Error::DimensionMismatch {
                expected: points.len(),
                got: labels.len(),
            });
        }
        check_binary(&labels)?;
        Self::new(points, Arc::new(FixedLabels(labels)))
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

    pub fn label(&self, index: usize) -> Result<f64> {
        let (y, _) = self
            .oracle
            .fetch(index, &self.points[index])
            .map_err(|_| Error::NonBinaryLabel { index, value: f64::NAN })?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::NonBinaryLabel { index, value: y });
        }
        Ok(y)
    }

    pub fn labels_fetched(&self) -> usize {
        self.oracle.distinct_queries()
    }

    /// Every label; fetches whatever is still missing.
    pub fn all_labels(&self) -> Result<Vec<f64>> {
        (0..self.len()).map(|i| self.label(i)).collect()
    }
}

fn check_binary(labels: &[f64]) -> Result<()> {
    match labels.iter().position(|&y| y != 0.0 && y != 1.0) {
        Some(index) => Err(Error::NonBinaryLabel {
            index,
            value: labels[index],
        }),
        None => Ok(()),
    }
}

/// Mean over `eval_set` of `sum_i p_{S,A}(x_i, x) |f(x_i) - y|`.
pub fn exact_nw_loss(
    a: &DiagonalTransform,
    points: &[Vec<f64>],
    labels: &[f64],
    eval_set: &[(Vec<f64>, f64)],
) -> Result<f64> {
    if points.is_empty() || eval_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if labels.len() != points.len() {
        return Err(Error::DimensionMismatch {
            expected: points.len(),
            got: labels.len(),
        });
    }
    check_points(a, points, &eval_set[0].0)?;
    let e = &a.eigenvalues;
    let terms = eval_set
        .iter()
        .map(|(q, y)| {
            let mut num = 0.0;
            let mut den = 0.0;
            for (p, f) in points.iter().zip(labels) {
                let k = kernel_unchecked(e, q, p);
                den += k;
                num += k * (f - y).abs();
            }
            num / den
        })
        .collect();
    Ok(order_free_sum(terms) / eval_set.len() as f64)
}

/// Exact losses of every transform in `net`, in parallel.
pub fn exact_losses(
    net: &[DiagonalTransform],
    points: &[Vec<f64>],
    labels: &[f64],
    eval_set: &[(Vec<f64>, f64)],
) -> Result<Vec<f64>> {
    net.par_iter()
        .map(|a| exact_nw_loss(a, points, labels, eval_set))
        .collect()
}

/// How the kernel sums `sum_k K_A(z, x_k)` are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KdeMode {
    #[default]
    Exact,
    /// `(N/m)` times the sum over `m` points drawn without replacement.
    Subsample { m: usize },
}

impl fmt::Display for KdeMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KdeMode::Exact => write!(f, "exact"),
            KdeMode::Subsample { m } => write!(f, "subsample:{m}"),
        }
    }
}

impl FromStr for KdeMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "exact" {
            return Ok(KdeMode::Exact);
        }
        let m = s
            .strip_prefix("subsample:")
            .and_then(|m| m.parse::<usize>().ok())
            .filter(|&m| m > 0)
            .ok_or_else(|| invalid("kde_mode", format!("expected `exact` or `subsample:<m>`, got `{s}`")))?;
        Ok(KdeMode::Subsample { m })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NwEstimate {
    pub value: f64,
    pub argmin_eigenvalues: Vec<f64>,
    pub n_labels: usize,
    pub net_size: usize,
    pub n_draws: usize,
    pub seed: u64,
    pub kde_mode: String,
    /// Estimated loss of every transform, in net order.
    pub per_transform: Vec<f64>,
}

struct Draw {
    z: Vec<f64>,
    /// `|f(z) - f(x_j)|` for the drawn neighbour `j`.
    gap: f64,
    neighbour: usize,
    /// `p_{S,I}(x_j, z)`.
    base_prob: f64,
    subsample: Option<Vec<usize>>,
}

/// Estimates `min_A E_x sum_i p_{S,A}(x_i, x) |f(x_i) - f(x)|` over the
/// `eps`-net of transforms with eigenvalues in `[1,2]`.
pub fn nw_error<D: LabeledDistribution + ?Sized>(
    dataset: &NwDataset,
    dist: &D,
    epsilon: f64,
    delta: f64,
    seed: u64,
    kde_mode: KdeMode,
) -> Result<NwEstimate> {
    nw_error_with_constants(dataset, dist, epsilon, delta, seed, kde_mode, &Constants::default())
}

pub fn nw_error_with_constants<D: LabeledDistribution + ?Sized>(
    dataset: &NwDataset,
    dist: &D,
    epsilon: f64,
    delta: f64,
    seed: u64,
    kde_mode: KdeMode,
    constants: &Constants,
) -> Result<NwEstimate> {
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid("delta", format!("must lie in (0,1), got {delta}")));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if dist.dims() != dataset.dims() {
        return Err(Error::DimensionMismatch {
            expected: dataset.dims(),
            got: dist.dims(),
        });
    }
    constants.validate()?;
    let dims = dataset.dims();
    let n = dataset.len();
    let m_draws = constants.nw_samples(dims, epsilon, delta);
    let net = epsilon_net(dims, epsilon)?;
    let identity = DiagonalTransform::identity(dims);
    let points = dataset.points();
    let subsample = match kde_mode {
        KdeMode::Subsample { m } if m < n => Some(m),
        _ => None,
    };

    let mut draw_rng = rng::stream(seed, Stage::NwDraws);
    let mut neighbour_rng = rng::stream(seed, Stage::NwNeighbors);
    let mut draws = Vec::with_capacity(m_draws);
    for i in 0..m_draws {
        let (z, fz) = dist.sample_pair(&mut draw_rng);
        if fz != 0.0 && fz != 1.0 {
            return Err(Error::NonBinaryLabel { index: i, value: fz });
        }
        let weights: Vec<f64> = points.iter().map(|p| kernel_unchecked(&identity.eigenvalues, &z, p)).collect();
        let mut prefix = Vec::with_capacity(n);
        let mut acc = 0.0;
        for w in &weights {
            acc += w;
            prefix.push(acc);
        }
        let u = neighbour_rng.gen::<f64>() * acc;
        let j = prefix.partition_point(|&c| c <= u).min(n - 1);
        let fj = dataset.label(j)?;
        let sub = subsample.map(|m| {
            let mut r = rng::item_stream(seed, Stage::NwSubsample, i as u64);
            let mut idx = index::sample(&mut r, n, m).into_vec();
            idx.sort_unstable();
            idx
        });
        draws.push(Draw {
            gap: (fz - fj).abs(),
            base_prob: weights[j] / acc,
            neighbour: j,
            subsample: sub,
            z,
        });
    }

    let per_transform: Vec<f64> = net
        .par_iter()
        .map(|a| {
            let e = &a.eigenvalues;
            let terms = draws
                .iter()
                .map(|d| {
                    if d.gap == 0.0 {
                        return 0.0;
                    }
                    let total = match &d.subsample {
                        None => kernel_sum(e, points, &d.z),
                        Some(idx) => {
                            let s: f64 = idx.iter().map(|&k| kernel_unchecked(e, &d.z, &points[k])).sum();
                            s * n as f64 / idx.len() as f64
                        }
                    };
                    let p_hat = kernel_unchecked(e, &d.z, &points[d.neighbour]) / total;
                    d.gap * p_hat / d.base_prob
                })
                .collect();
            order_free_sum(terms) / draws.len() as f64
        })
        .collect();

    let (best, value) = per_transform
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, &v)| if v < acc.1 { (i, v) } else { acc });

    Ok(NwEstimate {
        value,
        argmin_eigenvalues: net[best].eigenvalues.clone(),
        n_labels: m_draws + dataset.labels_fetched(),
        net_size: net.len(),
        n_draws: m_draws,
        seed,
        kde_mode: kde_mode.to_string(),
        per_transform,
    })
}

/// Ratio `p_{S,A1}(x_i, q) / p_{S,A2}(x_i, q)` and the bound `(1+eps)^4` it
/// must respect, where `eps` is the largest relative gap between matching
/// eigenvalues.
pub fn check_kernel_stability(
    a1: &DiagonalTransform,
    a2: &DiagonalTransform,
    points: &[Vec<f64>],
    i: usize,
    q: &[f64],
) -> Result<(f64, f64)> {
    if a1.dims() != a2.dims() {
        return Err(Error::DimensionMismatch {
            expected: a1.dims(),
            got: a2.dims(),
        });
    }
    let eps = a1
        .eigenvalues
        .iter()
        .zip(&a2.eigenvalues)
        .map(|(x, y)| (x / y).max(y / x) - 1.0)
        .fold(0.0, f64::max);
    check_kernel_stability_with(a1, a2, eps, points, i, q)
}

/// As [`check_kernel_stability`], for a given `eps`. Fails unless
/// `(1+eps)^-1 A2 <= A1 <= (1+eps) A2` entrywise.
pub fn check_kernel_stability_with(
    a1: &DiagonalTransform,
    a2: &DiagonalTransform,
    epsilon: f64,
    points: &[Vec<f64>],
    i: usize,
    q: &[f64],
) -> Result<(f64, f64)> {
    if a1.dims() != a2.dims() {
        return Err(Error::DimensionMismatch {
            expected: a1.dims(),
            got: a2.dims(),
        });
    }
    let f = 1.0 + epsilon;
    let ordered = a1
        .eigenvalues
        .iter()
        .zip(&a2.eigenvalues)
        .all(|(x, y)| y / f <= *x * (1.0 + 1e-12) && *x <= y * f * (1.0 + 1e-12));
    if !ordered {
        return Err(Error::PreconditionViolated(format!(
            "transforms are not within a factor {f} of each other"
        )));
    }
    if i >= points.len() {
        return Err(invalid("i", "index outside the dataset"));
    }
    let p1 = prediction_probs(a1, points, q)?[i];
    let p2 = prediction_probs(a2, points, q)?[i];
    Ok((p1 / p2, f.powi(4)))
}

/// Smallest exact loss over the `eps`-net and over a finer net (the
/// `eps/4`-net together with the `eps`-net), and their difference.
pub fn check_net_sufficiency(
    points: &[Vec<f64>],
    labels: &[f64],
    eval_set: &[(Vec<f64>, f64)],
    epsilon: f64,
) -> Result<(f64, f64, f64)> {
    if points.is_empty() || eval_set.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_binary(labels)?;
    let dims = points[0].len();
    let coarse_net = epsilon_net(dims, epsilon)?;
    let mut grid = eigenvalue_grid(epsilon / 4.0, EIGEN_LO, EIGEN_HI)?;
    grid.extend(eigenvalue_grid(epsilon, EIGEN_LO, EIGEN_HI)?);
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    let fine_net = product_net(dims, &grid);
    let min = |net: &[DiagonalTransform]| -> Result<f64> {
        Ok(exact_losses(net, points, labels, eval_set)?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    };
    let coarse = min(&coarse_net)?;
    let fine = min(&fine_net)?;
    Ok((coarse, fine, coarse - fine))
}
