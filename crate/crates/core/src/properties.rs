//! A quick battery of invariant checks, run per seed.
//!
//! Each check is small enough for a debug build and exercises one invariant
//! at reduced scale. The full-scale versions live in the acceptance tests.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::constants::Constants;
use crate::error::Result;
use crate::estimation::build_session;
use crate::experiment::{cluster_distribution, realizable_distribution};
use crate::geometry::AxisBox;
use crate::learner::{FixedLabels, QuerySession};
use crate::lipschitz::{erm_fit_with, lipschitz_audit, random_lipschitz_fn, ErmProblem, ErmSolver, ExtensionRule};
use crate::nw::{
    check_kernel_stability, check_net_sufficiency, epsilon_net, importance_ratio_bound, nw_error, prediction_probs,
    DiagonalTransform, KdeMode, NwDataset, EIGEN_HI, EIGEN_LO,
};
use crate::partition::{offset_index_range, Partition, Scheme};
use crate::rng::{self, Stage, StreamRng};
use crate::synthetic::{LabeledDistribution, Marginal, PointSampler};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyCheck {
    pub name: String,
    pub seed: u64,
    pub passed: bool,
    pub detail: String,
}

type Outcome = Result<(bool, String)>;

fn run(index: u64, name: &str, seed: u64, f: impl FnOnce(&mut StreamRng) -> Outcome) -> PropertyCheck {
    let mut rng = rng::item_stream(seed, Stage::Audit, index);
    let (passed, detail) = match f(&mut rng) {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    PropertyCheck {
        name: name.into(),
        seed,
        passed,
        detail,
    }
}

fn extension_is_lipschitz(seed: u64, rng: &mut StreamRng) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    for rule in [ExtensionRule::UpperMcshane, ExtensionRule::LowerMcshane, ExtensionRule::Midpoint] {
        let f = random_lipschitz_fn(2, 5.0, 12, rule, rng)?;
        worst = worst.max(lipschitz_audit(|x| f.evaluate(x), 5.0, &AxisBox::unit(2), 2000, seed));
    }
    Ok((worst <= 1e-9, format!("max excess {worst:e}")))
}

fn erm_backends_agree(rng: &mut StreamRng) -> Outcome {
    let samples: Vec<(Vec<f64>, f64)> = (0..30).map(|_| (vec![rng.gen::<f64>()], rng.gen::<f64>())).collect();
    let p = ErmProblem::new(samples, 4.0, AxisBox::unit(1))?;
    let a = p.objective(&erm_fit_with(&p, ErmSolver::Chain)?);
    let b = p.objective(&erm_fit_with(&p, ErmSolver::LinearProgram)?);
    Ok(((a - b).abs() <= 1e-7, format!("chain {a}, lp {b}")))
}

fn cells_contain_their_points(seed: u64, rng: &mut StreamRng) -> Outcome {
    for (dims, l, eps) in [(1, 30.0, 0.25), (2, 20.0, 0.5)] {
        let p = crate::partition::preprocess(l, eps, dims, seed)?;
        for _ in 0..500 {
            let x: Vec<f64> = (0..dims).map(|_| rng.gen()).collect();
            let cell = p.locate(&x)?;
            if !p.cell_box(&cell).contains(&x) {
                return Ok((false, format!("{x:?} outside its cell {:?}", cell.index)));
            }
        }
    }
    Ok((true, "1000 points".into()))
}

fn short_mass_average(scheme: Scheme, l: f64, eps: f64, dims: usize) -> Result<f64> {
    let (lo, hi) = offset_index_range(scheme, eps, dims);
    let marginal = Marginal::Uniform { dims };
    let mut total = 0.0;
    for k in lo..=hi {
        let p = Partition::with_offsets(l, eps, dims, scheme, &vec![k; dims])?;
        total += p.short_mass_exact(&marginal);
    }
    Ok(total / (hi - lo + 1) as f64)
}

fn short_mass_is_small() -> Outcome {
    let one = short_mass_average(Scheme::Interval, 40.0, 0.25, 1)?;
    let two = short_mass_average(Scheme::Grid, 40.0, 0.25, 2)?;
    Ok((one <= 0.25 && two <= 0.5, format!("1D {one:.4}, 2D {two:.4}")))
}

fn small_session(seed: u64, dims: usize) -> Result<(QuerySession, f64)> {
    let l = if dims == 1 { 20.0 } else { 12.0 };
    let dist = realizable_distribution(dims, l, seed)?;
    Ok((build_session(l, 0.5, dims, &dist, seed, &Constants::default())?, l))
}

fn answers_are_lipschitz(seed: u64) -> Outcome {
    let mut detail = Vec::new();
    let mut ok = true;
    for dims in [1, 2] {
        let (s, l) = small_session(seed, dims)?;
        let worst = lipschitz_audit(|x| s.query(x).unwrap_or(f64::NAN), l, &AxisBox::unit(dims), 1500, seed);
        ok &= worst <= 1e-6;
        detail.push(format!("{dims}D {worst:e}"));
    }
    Ok((ok, detail.join(", ")))
}

fn answers_ignore_query_order(seed: u64, rng: &mut StreamRng) -> Outcome {
    let queries: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.gen(), rng.gen()]).collect();
    let (a, _) = small_session(seed, 2)?;
    let (b, _) = small_session(seed, 2)?;
    let forward: Vec<f64> = queries.iter().map(|q| a.query(q)).collect::<Result<_>>()?;
    let mut backward: Vec<f64> = queries.iter().rev().map(|q| b.query(q)).collect::<Result<_>>()?;
    backward.reverse();
    let same = forward.iter().zip(&backward).all(|(x, y)| x.to_bits() == y.to_bits());
    Ok((same, "200 queries".into()))
}

fn checkpoint_round_trip(seed: u64, rng: &mut StreamRng) -> Outcome {
    let (s, _) = small_session(seed, 1)?;
    let queries: Vec<Vec<f64>> = (0..100).map(|_| vec![rng.gen()]).collect();
    for q in &queries[..50] {
        s.query(q)?;
    }
    let text = serde_json::to_string(&s.checkpoint())?;
    let restored = QuerySession::restore(serde_json::from_str(&text)?, None)?;
    let same = queries[..50]
        .iter()
        .all(|q| matches!((s.query(q), restored.query(q)), (Ok(a), Ok(b)) if a.to_bits() == b.to_bits()));
    Ok((same, "50 cached queries".into()))
}

fn random_transform(dims: usize, rng: &mut StreamRng) -> DiagonalTransform {
    DiagonalTransform::new((0..dims).map(|_| rng.gen_range(EIGEN_LO..=EIGEN_HI)).collect()).expect("in range")
}

fn random_points(n: usize, dims: usize, rng: &mut StreamRng) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..dims).map(|_| rng.gen()).collect()).collect()
}

fn kernel_bounds_hold(rng: &mut StreamRng) -> Outcome {
    let bound16 = importance_ratio_bound(EIGEN_LO, EIGEN_HI);
    for _ in 0..200 {
        let dims = rng.gen_range(1..=3);
        let s = random_points(rng.gen_range(1..=12), dims, rng);
        let q: Vec<f64> = (0..dims).map(|_| rng.gen()).collect();
        let i = rng.gen_range(0..s.len());
        let a = random_transform(dims, rng);
        let probs = prediction_probs(&a, &s, &q)?;
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Ok((false, format!("probabilities sum to {sum}")));
        }
        let (ratio, bound) = check_kernel_stability(&a, &random_transform(dims, rng), &s, i, &q)?;
        if !(ratio >= 1.0 / bound && ratio <= bound) {
            return Ok((false, format!("ratio {ratio} outside bound {bound}")));
        }
        let base = prediction_probs(&DiagonalTransform::identity(dims), &s, &q)?[i];
        if probs[i] > bound16 * base {
            return Ok((false, format!("p_A {} above {bound16} p_I {base}", probs[i])));
        }
    }
    Ok((true, "200 instances".into()))
}

fn nw_budget_and_subsample(seed: u64) -> Outcome {
    let dist = cluster_distribution(2)?;
    let mut rng = rng::stream(seed, Stage::Dataset);
    let points: Vec<Vec<f64>> = (0..40).map(|_| dist.sample_x(&mut rng)).collect();
    let labels: Vec<f64> = points.iter().map(|p| dist.label(p, &mut rng)).collect();
    let exact = nw_error(&NwDataset::labeled(points.clone(), labels.clone())?, &dist, 0.5, 0.1, seed, KdeMode::Exact)?;
    let full = nw_error(
        &NwDataset::new(points, Arc::new(FixedLabels(labels)))?,
        &dist,
        0.5,
        0.1,
        seed,
        KdeMode::Subsample { m: 40 },
    )?;
    let ok = exact.n_labels <= 2 * exact.n_draws && (exact.value - full.value).abs() <= 1e-12;
    Ok((ok, format!("labels {} of {}, values {} / {}", exact.n_labels, 2 * exact.n_draws, exact.value, full.value)))
}

fn net_is_sufficient(rng: &mut StreamRng) -> Outcome {
    let eps = 0.5;
    let dims = rng.gen_range(1..=2);
    let s = random_points(15, dims, rng);
    let labels: Vec<f64> = (0..15).map(|_| f64::from(rng.gen::<bool>())).collect();
    let eval: Vec<(Vec<f64>, f64)> = random_points(60, dims, rng)
        .into_iter()
        .map(|x| (x, f64::from(rng.gen::<bool>())))
        .collect();
    let (_, _, gap) = check_net_sufficiency(&s, &labels, &eval, eps)?;
    Ok(((0.0..=15.0 * eps).contains(&gap), format!("gap {gap:e}; net size {}", epsilon_net(dims, eps)?.len())))
}

/// Runs every check for `seed`.
pub fn run_suite(seed: u64) -> Vec<PropertyCheck> {
    vec![
        run(1, "extension_is_lipschitz", seed, |r| extension_is_lipschitz(seed, r)),
        run(2, "erm_backends_agree", seed, erm_backends_agree),
        run(3, "cells_contain_their_points", seed, |r| cells_contain_their_points(seed, r)),
        run(4, "short_mass_is_small", seed, |_| short_mass_is_small()),
        run(5, "answers_are_lipschitz", seed, |_| answers_are_lipschitz(seed)),
        run(6, "answers_ignore_query_order", seed, |r| answers_ignore_query_order(seed, r)),
        run(7, "checkpoint_round_trip", seed, |r| checkpoint_round_trip(seed, r)),
        run(8, "kernel_bounds_hold", seed, kernel_bounds_hold),
        run(9, "nw_budget_and_subsample", seed, |_| nw_budget_and_subsample(seed)),
        run(10, "net_is_sufficient", seed, net_is_sufficient),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes() {
        let failed: Vec<_> = run_suite(11).into_iter().filter(|c| !c.passed).collect();
        assert!(failed.is_empty(), "{failed:#?}");
    }
}
