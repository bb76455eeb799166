//! Estimating the best achievable absolute error of the Lipschitz class.
//!
//! [`estimate_error`] draws `N = ceil(c/eps^2)` labeled pairs and averages the
//! residuals of the local learner on them, so it needs only the labels of the
//! cells those draws land in. [`oracle_error`] is the full-information
//! baseline: one global ERM over a labeled dataset.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::{Error, Result};
use crate::geometry::AxisBox;
use crate::learner::{DistributionLabels, QuerySession, UnlabeledPool};
use crate::lipschitz::{erm_fit, ErmProblem};
use crate::partition::preprocess;
use crate::rng::{self, Stage};
use crate::synthetic::LabeledDistribution;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorEstimate {
    pub estimate: f64,
    pub epsilon: f64,
    /// Labeled draws used for the average (`N`).
    pub n_fresh_labels: usize,
    /// Distinct pool labels fetched by the learner.
    pub n_pool_labels: usize,
    pub seed: u64,
    pub pool_size: usize,
    pub sample_cap: usize,
    pub per_query_cap: usize,
}

/// Sum of values, independent of their order.
pub(crate) fn order_free_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.iter().sum()
}

/// Mean absolute residual of the session's answers on `pairs`. Queries run in
/// parallel; the result does not depend on the order of `pairs`.
pub fn mean_residual(session: &QuerySession, pairs: &[(Vec<f64>, f64)]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("pairs"));
    }
    let residuals = pairs
        .par_iter()
        .map(|(x, y)| session.query(x).map(|v| (v - y).abs()))
        .collect::<Result<Vec<f64>>>()?;
    Ok(order_free_sum(residuals) / pairs.len() as f64)
}

/// Draws `n` labeled pairs on the evaluation stream of `seed`.
pub fn draw_pairs<D: LabeledDistribution + ?Sized>(dist: &D, n: usize, seed: u64) -> Vec<(Vec<f64>, f64)> {
    let mut rng = rng::stream(seed, Stage::Evaluation);
    (0..n).map(|_| dist.sample_pair(&mut rng)).collect()
}

/// Builds the partition, pool and session that [`estimate_error`] uses for
/// `seed`, with labels drawn from `dist`.
pub fn build_session<D>(
    lipschitz_constant: f64,
    epsilon: f64,
    dims: usize,
    dist: &D,
    seed: u64,
    constants: &Constants,
) -> Result<QuerySession>
where
    D: LabeledDistribution + Clone + 'static,
{
    constants.validate()?;
    if dist.dims() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            got: dist.dims(),
        });
    }
    let partition = preprocess(lipschitz_constant, epsilon, dims, seed)?;
    let scheme = partition.scheme();
    let pool_size = constants.pool_size(scheme, lipschitz_constant, epsilon, dims);
    let pool = UnlabeledPool::sample(dist, pool_size, seed, "distribution")?;
    let cap = constants.sample_cap(scheme, epsilon, dims);
    let source = Arc::new(DistributionLabels::new(dist.clone(), seed));
    QuerySession::new(partition, pool, source, cap)
}

/// Estimates `min_f E|y - f(x)|` over L-Lipschitz `f` to additive `epsilon`
/// (with probability at least 1/2 under the theory's constants).
pub fn estimate_error<D>(
    lipschitz_constant: f64,
    epsilon: f64,
    dims: usize,
    dist: &D,
    seed: u64,
    constants: &Constants,
) -> Result<ErrorEstimate>
where
    D: LabeledDistribution + Clone + 'static,
{
    let session = build_session(lipschitz_constant, epsilon, dims, dist, seed, constants)?;
    let n = constants.estimation_samples(epsilon);
    let pairs = draw_pairs(dist, n, seed);
    let estimate = mean_residual(&session, &pairs)?;
    let scheme = session.partition().scheme();
    Ok(ErrorEstimate {
        estimate,
        epsilon,
        n_fresh_labels: n,
        n_pool_labels: session.budget_report().distinct_labels,
        seed,
        pool_size: session.pool().len(),
        sample_cap: session.sample_cap(),
        per_query_cap: constants.per_query_cap(scheme, epsilon, dims),
    })
}

/// Mean absolute training error of the global ERM on `dataset` over
/// `[0,1]^dims`.
///
/// One-dimensional data is solved exactly in `O(n log n)`; higher dimensions
/// go through a network-flow solver with constraint generation.
pub fn oracle_error(lipschitz_constant: f64, dims: usize, dataset: &[(Vec<f64>, f64)]) -> Result<f64> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset"));
    }
    let problem = ErmProblem::new(dataset.to_vec(), lipschitz_constant, AxisBox::unit(dims))?;
    let fit = erm_fit(&problem)?;
    Ok(problem.objective(&fit) / dataset.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::{Marginal, SyntheticDistribution, Target};

    fn noise() -> SyntheticDistribution {
        SyntheticDistribution::new(
            Marginal::Uniform { dims: 1 },
            Target::BernoulliNoise {
                base: Box::new(Target::Constant { value: 0.5 }),
                rate: 1.0,
            },
        )
        .unwrap()
    }

    #[test]
    fn oracle_on_realizable_data_is_zero() {
        let data: Vec<(Vec<f64>, f64)> = (0..50).map(|i| {
            let x = i as f64 / 49.0;
            (vec![x], 0.5 + 0.4 * (3.0 * x).sin())
        }).collect();
        assert!(oracle_error(2.0, 1, &data).unwrap() < 1e-6);
    }

    #[test]
    fn oracle_on_coincident_conflict_is_half() {
        let data = vec![(vec![0.3], 0.0), (vec![0.3], 1.0)];
        assert!((oracle_error(5.0, 1, &data).unwrap() - 0.5).abs() < 1e-12);
        assert!(matches!(oracle_error(5.0, 1, &[]), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn single_draw_at_epsilon_one() {
        let e = estimate_error(10.0, 1.0, 1, &noise(), 3, &Constants::default()).unwrap();
        assert_eq!(e.n_fresh_labels, 1);
        assert!((0.0..=1.0).contains(&e.estimate));
    }

    #[test]
    fn estimate_is_order_free() {
        let c = Constants::default();
        let session = build_session(20.0, 0.5, 1, &noise(), 4, &c).unwrap();
        let mut pairs = draw_pairs(&noise(), 40, 4);
        let a = mean_residual(&session, &pairs).unwrap();
        pairs.reverse();
        pairs.rotate_left(7);
        assert_eq!(mean_residual(&session, &pairs).unwrap(), a);
    }

    #[test]
    fn label_audit() {
        let c = Constants::default();
        let e = estimate_error(20.0, 0.5, 1, &noise(), 5, &c).unwrap();
        assert_eq!(e.n_fresh_labels, 4);
        assert!(e.n_pool_labels <= e.per_query_cap * e.n_fresh_labels);
    }
}
