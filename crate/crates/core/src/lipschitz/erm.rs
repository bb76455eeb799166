//! Absolute-loss empirical risk minimization over the Lipschitz class.
//!
//! Only the values at the sample points matter: any L-consistent assignment of
//! values in `[0,1]` extends to a member of the class with the same loss. In one
//! dimension the pairwise constraints reduce to those between sorted neighbours,
//! and the problem is solved exactly by a dynamic program over convex piecewise
//! linear functions. In higher dimension it is a linear program whose dual is a
//! min-cost circulation, solved by network simplex with constraint generation.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::flow;
use super::{Anchor, AnchoredLipschitzFn, ExtensionRule, LIPSCHITZ_TOLERANCE};
use crate::error::{invalid, Error, Result};
use crate::geometry::{sup_distance, AxisBox};

/// Labeled samples inside a domain box, to be fitted by an L-Lipschitz function.
#[derive(Debug, Clone, PartialEq)]
pub struct ErmProblem {
    samples: Vec<(Vec<f64>, f64)>,
    lipschitz_constant: f64,
    domain: AxisBox,
}

impl ErmProblem {
    pub fn new(samples: Vec<(Vec<f64>, f64)>, lipschitz_constant: f64, domain: AxisBox) -> Result<Self> {
        if !(lipschitz_constant.is_finite() && lipschitz_constant >= 0.0) {
            return Err(invalid("lipschitz_constant", "must be finite and >= 0"));
        }
        if samples.is_empty() {
            return Err(Error::EmptyInput("samples"));
        }
        let dims = domain.dims();
        for (x, y) in &samples {
            if x.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: x.len(),
                });
            }
            for (index, (&v, (&lo, &hi))) in x.iter().zip(domain.lo.iter().zip(&domain.hi)).enumerate() {
                if !(lo <= v && v <= hi) {
                    return Err(Error::OutOfDomain { index, value: v });
                }
            }
            if !(0.0..=1.0).contains(y) {
                return Err(invalid("samples", format!("label {y} outside [0,1]")));
            }
        }
        Ok(Self {
            samples,
            lipschitz_constant,
            domain,
        })
    }

    pub fn samples(&self) -> &[(Vec<f64>, f64)] {
        &self.samples
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz_constant
    }

    pub fn domain(&self) -> &AxisBox {
        &self.domain
    }

    /// Empirical absolute loss of `f` on the samples.
    pub fn objective(&self, f: &AnchoredLipschitzFn) -> f64 {
        self.samples.iter().map(|(x, y)| (y - f.evaluate(x)).abs()).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErmSolver {
    /// Chain dynamic program in one dimension, network flow otherwise.
    #[default]
    Auto,
    /// Exact dynamic program; one-dimensional problems only.
    Chain,
    /// Linear program with constraint generation; any dimension.
    LinearProgram,
    /// Network simplex on the dual flow problem, with constraint generation;
    /// any dimension. Falls back to the linear program if it stalls.
    Flow,
}

/// Minimizes the empirical absolute loss over the L-Lipschitz class.
///
/// The returned function has its anchors at exactly the sample points and uses
/// the midpoint rule away from them.
pub fn erm_fit(problem: &ErmProblem) -> Result<AnchoredLipschitzFn> {
    erm_fit_with(problem, ErmSolver::Auto)
}

pub fn erm_fit_with(problem: &ErmProblem, solver: ErmSolver) -> Result<AnchoredLipschitzFn> {
    let dims = problem.domain.dims();
    let values = match solver {
        ErmSolver::Auto if dims == 1 => chain_values(problem),
        ErmSolver::Chain if dims == 1 => chain_values(problem),
        ErmSolver::Chain => {
            return Err(invalid("solver", "the chain solver needs one-dimensional samples"));
        }
        ErmSolver::LinearProgram => lp_values(problem)?,
        ErmSolver::Auto | ErmSolver::Flow => flow_values(problem)?,
    };
    let anchors = problem
        .samples
        .iter()
        .zip(values)
        .map(|((x, _), v)| Anchor::new(x.clone(), v))
        .collect();
    AnchoredLipschitzFn::new(anchors, problem.lipschitz_constant, ExtensionRule::Midpoint)
}

#[derive(Clone, Copy, PartialEq)]
struct Key(f64);

impl Eq for Key {}

impl PartialOrd for Key {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Key {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Breakpoints of a convex piecewise linear function of one variable: slopes
/// change by one at each breakpoint. `left` holds the breakpoints below the
/// minimizing interval, `right` those above it, each with a lazy shift.
struct SlopeTrick {
    left: BinaryHeap<Key>,
    right: BinaryHeap<std::cmp::Reverse<Key>>,
    shift_left: f64,
    shift_right: f64,
}

impl SlopeTrick {
    fn new() -> Self {
        Self {
            left: BinaryHeap::new(),
            right: BinaryHeap::new(),
            shift_left: 0.0,
            shift_right: 0.0,
        }
    }

    fn top_left(&self) -> f64 {
        self.left.peek().map_or(f64::NEG_INFINITY, |k| k.0 + self.shift_left)
    }

    fn top_right(&self) -> f64 {
        self.right.peek().map_or(f64::INFINITY, |k| k.0 .0 + self.shift_right)
    }

    fn push_left(&mut self, a: f64) {
        self.left.push(Key(a - self.shift_left));
    }

    fn push_right(&mut self, a: f64) {
        self.right.push(std::cmp::Reverse(Key(a - self.shift_right)));
    }

    /// Adds `|v - a|`.
    fn add_abs(&mut self, a: f64) {
        // max(0, v - a)
        self.push_left(a);
        let moved = self.top_left();
        self.left.pop();
        self.push_right(moved);
        // max(0, a - v)
        self.push_right(a);
        let moved = self.top_right();
        self.right.pop();
        self.push_left(moved);
    }

    /// Replaces `F(v)` by `min_{|u - v| <= h} F(u)`.
    fn widen(&mut self, h: f64) {
        self.shift_left -= h;
        self.shift_right += h;
    }
}

fn chain_values(problem: &ErmProblem) -> Vec<f64> {
    let samples = &problem.samples;
    let n = samples.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| samples[a].0[0].total_cmp(&samples[b].0[0]));

    let reach: Vec<f64> = order
        .windows(2)
        .map(|w| problem.lipschitz_constant * (samples[w[1]].0[0] - samples[w[0]].0[0]))
        .collect();

    // minimizer of the cost-to-come at each position, before widening
    let mut argmin = Vec::with_capacity(n);
    let mut fn_state = SlopeTrick::new();
    for (pos, &i) in order.iter().enumerate() {
        if pos > 0 {
            fn_state.widen(reach[pos - 1]);
        }
        let y = samples[i].1;
        fn_state.add_abs(y);
        // the heap tops can cross by an ulp after the lazy shifts
        let (lo, hi) = (fn_state.top_left(), fn_state.top_right());
        argmin.push(y.max(lo.min(hi)).min(hi.max(lo)));
    }

    let mut sorted_values = vec![0.0; n];
    sorted_values[n - 1] = argmin[n - 1];
    for pos in (0..n - 1).rev() {
        let next = sorted_values[pos + 1];
        let h = reach[pos];
        sorted_values[pos] = argmin[pos].clamp(next - h, next + h);
    }

    let mut values = vec![0.0; n];
    for (pos, &i) in order.iter().enumerate() {
        values[i] = sorted_values[pos].clamp(0.0, 1.0);
    }
    values
}

const SEED_NEIGHBOURS: usize = 6;
const MAX_ROUNDS: usize = 200;

fn nearest_pairs(reps: &[usize], dist: impl Fn(usize, usize) -> f64) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for &i in reps {
        let mut near: Vec<(f64, usize)> = reps.iter().filter(|&&j| j != i).map(|&j| (dist(i, j), j)).collect();
        let k = SEED_NEIGHBOURS.min(near.len());
        if k > 0 && k < near.len() {
            near.select_nth_unstable_by(k - 1, |a, b| a.0.total_cmp(&b.0));
        }
        pairs.extend(near.iter().take(k).map(|&(_, j)| (i, j)));
    }
    pairs
}

/// Pairs whose sup-norm constraint is not implied by a chain through a third
/// point.
///
/// In `u = x + y`, `w = x - y` the sup-norm cones become quadrants, and
/// `d(i,k) + d(k,j) = d(i,j)` whenever `k` lies in the `(u,w)` rectangle
/// spanned by `i` and `j`. Only pairs with an empty rectangle are kept.
fn planar_pairs(samples: &[(Vec<f64>, f64)], reps: &[usize]) -> Vec<(usize, usize)> {
    let mut pairs = Vec::new();
    for sign in [1.0, -1.0] {
        let mut pts: Vec<(f64, f64, usize)> = reps
            .iter()
            .map(|&i| {
                let p = &samples[i].0;
                (p[0] + p[1], sign * (p[0] - p[1]), i)
            })
            .collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
        for (a, &(_, wi, i)) in pts.iter().enumerate() {
            let mut ceiling = f64::INFINITY;
            for &(_, wj, j) in &pts[a + 1..] {
                if wj >= wi && wj < ceiling {
                    pairs.push((i, j));
                    ceiling = wj;
                }
                if wj == wi {
                    break;
                }
            }
        }
    }
    pairs
}

/// Duplicate points share one variable; `representative[j]` is the first copy.
fn representatives(samples: &[(Vec<f64>, f64)]) -> (Vec<usize>, Vec<usize>) {
    let n = samples.len();
    let mut representative: Vec<usize> = (0..n).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        samples[a]
            .0
            .iter()
            .zip(&samples[b].0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    for w in order.windows(2) {
        if samples[w[0]].0 == samples[w[1]].0 {
            representative[w[1]] = representative[w[0]];
        }
    }
    let reps = (0..n).filter(|&i| representative[i] == i).collect();
    (representative, reps)
}

fn seed_constraints(problem: &ErmProblem, reps: &[usize]) -> HashSet<(usize, usize)> {
    let samples = &problem.samples;
    let l = problem.lipschitz_constant;
    let dist = |i: usize, j: usize| sup_distance(&samples[i].0, &samples[j].0);
    let seeds = if problem.domain.dims() == 2 {
        planar_pairs(samples, reps)
    } else {
        nearest_pairs(reps, dist)
    };
    // pairs at distance >= 1/L never bind since values lie in [0,1]
    let mut constraints = HashSet::new();
    for (i, j) in seeds.into_iter().filter(|&(i, j)| l * dist(i, j) < 1.0) {
        constraints.insert((i, j));
        constraints.insert((j, i));
    }
    constraints
}

/// The most violated constraint per representative, among those not yet in
/// `constraints`; they are inserted as a side effect.
fn new_violations(problem: &ErmProblem, values: &[f64], reps: &[usize], constraints: &mut HashSet<(usize, usize)>) -> Vec<(usize, usize)> {
    let samples = &problem.samples;
    let l = problem.lipschitz_constant;
    let mut violated = Vec::new();
    for &i in reps {
        let mut worst = (LIPSCHITZ_TOLERANCE * 0.1, usize::MAX);
        for &j in reps {
            let excess = values[i] - values[j] - l * sup_distance(&samples[i].0, &samples[j].0);
            if excess > worst.0 {
                worst = (excess, j);
            }
        }
        if worst.1 != usize::MAX && constraints.insert((i, worst.1)) {
            violated.push((i, worst.1));
        }
    }
    violated
}

fn not_converged() -> Error {
    Error::Solver(format!("constraint generation did not converge in {MAX_ROUNDS} rounds"))
}

/// Solves the dual min-cost circulation: one node per distinct point plus a
/// root at potential 0. Each sample contributes a unit arc each way between
/// its point and the root with cost `-y` and `+y`, each constraint an
/// uncapacitated arc of cost `L d`. Optimal potentials are optimal values.
fn flow_values(problem: &ErmProblem) -> Result<Vec<f64>> {
    let samples = &problem.samples;
    let n = samples.len();
    let l = problem.lipschitz_constant;
    let (representative, reps) = representatives(samples);
    let mut node = vec![usize::MAX; n];
    for (k, &r) in reps.iter().enumerate() {
        node[r] = k;
    }
    let root = reps.len();

    let mut base = Vec::with_capacity(2 * n);
    let mut initial = vec![usize::MAX; root + 1];
    for (j, (_, y)) in samples.iter().enumerate() {
        let v = node[representative[j]];
        base.push(flow::Arc { src: v, dst: root, cost: -y, cap: 1 });
        if initial[v] == usize::MAX {
            initial[v] = base.len();
        }
        base.push(flow::Arc { src: root, dst: v, cost: *y, cap: 1 });
    }

    let mut constraints = seed_constraints(problem, &reps);
    for _ in 0..MAX_ROUNDS {
        let mut ordered: Vec<_> = constraints.iter().copied().collect();
        ordered.sort_unstable();
        let mut arcs = base.clone();
        arcs.extend(ordered.into_iter().map(|(i, j)| flow::Arc {
            src: node[j],
            dst: node[i],
            cost: l * sup_distance(&samples[i].0, &samples[j].0),
            cap: FLOW_CAP,
        }));
        let Some(pi) = flow::potentials(root + 1, root, &arcs, &initial) else {
            return lp_values(problem);
        };
        let values: Vec<f64> = (0..n).map(|j| pi[node[representative[j]]].clamp(0.0, 1.0)).collect();
        if new_violations(problem, &values, &reps, &mut constraints).is_empty() {
            return Ok(values);
        }
    }
    Err(not_converged())
}

/// Effectively unbounded: every augmenting cycle changes the cost by at least
/// its flow times a positive reduced cost, and the cost stays within `[-n, 0]`.
const FLOW_CAP: i64 = 1 << 40;

fn lp_values(problem: &ErmProblem) -> Result<Vec<f64>> {
    let samples = &problem.samples;
    let n = samples.len();
    let l = problem.lipschitz_constant;
    let dist = |i: usize, j: usize| sup_distance(&samples[i].0, &samples[j].0);
    let (representative, reps) = representatives(samples);
    let mut constraints = seed_constraints(problem, &reps);

    let mut lp = Problem::new(OptimizationDirection::Minimize);
    let v: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, 1.0))).collect();
    let t: Vec<_> = (0..n).map(|_| lp.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for j in 0..n {
        let r = v[representative[j]];
        let y = samples[j].1;
        lp.add_constraint([(t[j], 1.0), (r, -1.0)], ComparisonOp::Ge, -y);
        lp.add_constraint([(t[j], 1.0), (r, 1.0)], ComparisonOp::Ge, y);
    }
    let mut ordered: Vec<_> = constraints.iter().copied().collect();
    ordered.sort_unstable();
    for (i, j) in ordered {
        lp.add_constraint([(v[i], 1.0), (v[j], -1.0)], ComparisonOp::Le, l * dist(i, j));
    }
    let solver_err = |e: microlp::Error| Error::Solver(e.to_string());
    let interrupted = |e: microlp::InterruptedSolve| Error::Solver(format!("{e:?}"));
    let mut solution = lp.solve().map_err(solver_err)?.into_solution().map_err(interrupted)?;

    // later rounds re-optimize from the previous basis
    for _ in 0..MAX_ROUNDS {
        let values: Vec<f64> = (0..n)
            .map(|j| solution.var_value(v[representative[j]]).clamp(0.0, 1.0))
            .collect();
        let violated = new_violations(problem, &values, &reps, &mut constraints);
        if violated.is_empty() {
            return Ok(values);
        }
        for (i, j) in violated {
            solution = solution
                .add_constraint([(v[i], 1.0), (v[j], -1.0)], ComparisonOp::Le, l * dist(i, j))
                .map_err(solver_err)?
                .into_solution()
                .map_err(interrupted)?;
        }
    }
    Err(not_converged())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem_1d(points: &[(f64, f64)], l: f64) -> ErmProblem {
        ErmProblem::new(points.iter().map(|&(x, y)| (vec![x], y)).collect(), l, AxisBox::unit(1)).unwrap()
    }

    #[test]
    fn steep_pair_is_split_at_the_lipschitz_limit() {
        let p = problem_1d(&[(0.0, 0.0), (0.1, 1.0)], 2.0);
        for solver in [ErmSolver::Chain, ErmSolver::LinearProgram, ErmSolver::Flow] {
            let f = erm_fit_with(&p, solver).unwrap();
            assert!((p.objective(&f) - 0.8).abs() < 1e-9);
            let gap = f.anchors()[1].value - f.anchors()[0].value;
            assert!((gap - 0.2).abs() < 1e-9);
        }
    }

    #[test]
    fn consistent_labels_are_fitted_exactly() {
        let p = problem_1d(&[(0.1, 0.2), (0.5, 0.5), (0.9, 0.1)], 1.0);
        let f = erm_fit(&p).unwrap();
        assert!(p.objective(&f) < 1e-12);
        for (a, (_, y)) in f.anchors().iter().zip(p.samples()) {
            assert!((a.value - y).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_constant_gives_a_median() {
        let p = problem_1d(&[(0.1, 0.0), (0.2, 0.3), (0.8, 1.0), (0.9, 0.9), (0.5, 0.2)], 0.0);
        let f = erm_fit(&p).unwrap();
        for a in f.anchors() {
            assert!((a.value - 0.3).abs() < 1e-12);
        }
        assert!((p.objective(&f) - (0.3 + 0.0 + 0.7 + 0.6 + 0.1)).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_share_a_value() {
        let p = problem_1d(&[(0.4, 0.0), (0.4, 1.0), (0.4, 1.0), (0.6, 0.5)], 1.0);
        for solver in [ErmSolver::Chain, ErmSolver::LinearProgram, ErmSolver::Flow] {
            let f = erm_fit_with(&p, solver).unwrap();
            let a = f.anchors();
            assert_eq!(a[0].value, a[1].value);
            assert_eq!(a[1].value, a[2].value);
        }
    }

    #[test]
    fn chain_and_lp_agree_on_noisy_data() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let pts: Vec<(f64, f64)> = (0..60).map(|_| (rng.gen::<f64>(), if rng.gen_bool(0.5) { 1.0 } else { rng.gen() })).collect();
        let p = problem_1d(&pts, 3.0);
        let a = p.objective(&erm_fit_with(&p, ErmSolver::Chain).unwrap());
        let b = p.objective(&erm_fit_with(&p, ErmSolver::LinearProgram).unwrap());
        assert!((a - b).abs() < 1e-6, "chain {a} vs lp {b}");
    }

    #[test]
    fn two_dimensional_fit_respects_the_constant() {
        let samples = vec![
            (vec![0.0, 0.0], 0.0),
            (vec![0.1, 0.05], 1.0),
            (vec![0.5, 0.5], 0.5),
            (vec![0.55, 0.2], 0.9),
        ];
        let p = ErmProblem::new(samples, 2.0, AxisBox::unit(2)).unwrap();
        let f = erm_fit(&p).unwrap();
        assert!((p.objective(&f) - 0.8).abs() < 1e-7, "objective {}", p.objective(&f));
    }

    #[test]
    fn flow_and_lp_agree_in_higher_dimension() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for (dims, l) in [(2, 4.0), (2, 15.0), (3, 6.0)] {
            let mut samples: Vec<(Vec<f64>, f64)> = (0..80)
                .map(|_| ((0..dims).map(|_| rng.gen::<f64>()).collect(), f64::from(rng.gen_bool(0.4))))
                .collect();
            samples.push((samples[3].0.clone(), 1.0 - samples[3].1));
            let p = ErmProblem::new(samples, l, AxisBox::unit(dims)).unwrap();
            let a = p.objective(&erm_fit_with(&p, ErmSolver::Flow).unwrap());
            let b = p.objective(&erm_fit_with(&p, ErmSolver::LinearProgram).unwrap());
            assert!((a - b).abs() < 1e-6, "{dims}D: flow {a} vs lp {b}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(ErmProblem::new(vec![], 1.0, AxisBox::unit(1)).is_err());
        assert!(matches!(
            ErmProblem::new(vec![(vec![1.2], 0.0)], 1.0, AxisBox::unit(1)),
            Err(Error::OutOfDomain { .. })
        ));
        assert!(ErmProblem::new(vec![(vec![0.2], 1.5)], 1.0, AxisBox::unit(1)).is_err());
        let two_d = ErmProblem::new(vec![(vec![0.2, 0.1], 0.5)], 1.0, AxisBox::unit(2)).unwrap();
        assert!(erm_fit_with(&two_d, ErmSolver::Chain).is_err());
    }
}
