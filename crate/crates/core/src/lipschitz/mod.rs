//! Bounded L-Lipschitz functions under the sup-norm.
//!
//! A fitted function is stored as a finite set of anchors `(x_j, v_j)` plus a
//! rule that extends it to all of `[0,1]^d`:
//!
//! * upper McShane: `min_j (v_j + L |x - x_j|_inf)`
//! * lower McShane: `max_j (v_j - L |x - x_j|_inf)`
//! * midpoint: the mean of the two
//!
//! Each value is clamped to `[0,1]`; clamping keeps the Lipschitz constant.

mod erm;
mod flow;

pub use erm::{erm_fit, erm_fit_with, ErmProblem, ErmSolver};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::{sup_distance, AxisBox};
use crate::rng::{self, Stage};

/// Slack allowed on Lipschitz and consistency checks to absorb rounding.
pub const LIPSCHITZ_TOLERANCE: f64 = 1e-9;

/// How a function known at its anchors is evaluated elsewhere.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExtensionRule {
    UpperMcshane,
    LowerMcshane,
    #[default]
    Midpoint,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Anchor {
    pub point: Vec<f64>,
    pub value: f64,
}

impl Anchor {
    pub fn new(point: Vec<f64>, value: f64) -> Self {
        Self { point, value }
    }
}

/// An L-Lipschitz function `[0,1]^d -> [0,1]` given by anchors and an
/// [`ExtensionRule`].
///
/// Construction checks that the anchor values lie in `[0,1]` and are mutually
/// L-consistent (up to [`LIPSCHITZ_TOLERANCE`]), so every value of this type is
/// a member of the Lipschitz class. Instances are immutable and `Sync`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawFn", into = "RawFn")]
pub struct AnchoredLipschitzFn {
    dims: usize,
    lipschitz_constant: f64,
    rule: ExtensionRule,
    anchors: Vec<Anchor>,
}

#[derive(Serialize, Deserialize)]
struct RawFn {
    dims: usize,
    lipschitz_constant: f64,
    rule: ExtensionRule,
    anchors: Vec<Anchor>,
}

impl TryFrom<RawFn> for AnchoredLipschitzFn {
    type Error = Error;

    fn try_from(raw: RawFn) -> Result<Self> {
        if raw.anchors.is_empty() {
            Self::empty(raw.dims, raw.lipschitz_constant, raw.rule)
        } else {
            Self::new(raw.anchors, raw.lipschitz_constant, raw.rule)
        }
    }
}

impl From<AnchoredLipschitzFn> for RawFn {
    fn from(f: AnchoredLipschitzFn) -> Self {
        RawFn {
            dims: f.dims,
            lipschitz_constant: f.lipschitz_constant,
            rule: f.rule,
            anchors: f.anchors,
        }
    }
}

fn check_constant(l: f64) -> Result<()> {
    if l.is_finite() && l >= 0.0 {
        Ok(())
    } else {
        Err(invalid("lipschitz_constant", format!("must be finite and >= 0, got {l}")))
    }
}

impl AnchoredLipschitzFn {
    /// Builds a function from at least one anchor.
    pub fn new(anchors: Vec<Anchor>, lipschitz_constant: f64, rule: ExtensionRule) -> Result<Self> {
        check_constant(lipschitz_constant)?;
        let first = anchors.first().ok_or(Error::EmptyInput("anchors"))?;
        let dims = first.point.len();
        if dims == 0 {
            return Err(invalid("anchors", "points must have at least one coordinate"));
        }
        for a in &anchors {
            if a.point.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: a.point.len(),
                });
            }
            if a.point.iter().any(|c| !c.is_finite()) {
                return Err(invalid("anchors", "non-finite coordinate"));
            }
            if !(0.0..=1.0).contains(&a.value) {
                return Err(invalid("anchors", format!("value {} outside [0,1]", a.value)));
            }
        }
        for i in 0..anchors.len() {
            for j in (i + 1)..anchors.len() {
                let d = sup_distance(&anchors[i].point, &anchors[j].point);
                let gap = (anchors[i].value - anchors[j].value).abs();
                if d == 0.0 && gap > LIPSCHITZ_TOLERANCE {
                    return Err(Error::DuplicateAnchor { first: i, second: j });
                }
                let excess = gap - lipschitz_constant * d;
                if excess > LIPSCHITZ_TOLERANCE {
                    return Err(Error::LipschitzViolation {
                        first: i,
                        second: j,
                        excess,
                    });
                }
            }
        }
        Ok(Self {
            dims,
            lipschitz_constant,
            rule,
            anchors,
        })
    }

    /// A function with no anchors. Its upper envelope is 1, its lower
    /// envelope 0, and its midpoint 1/2.
    pub fn empty(dims: usize, lipschitz_constant: f64, rule: ExtensionRule) -> Result<Self> {
        check_constant(lipschitz_constant)?;
        if dims == 0 {
            return Err(invalid("dims", "must be at least 1"));
        }
        Ok(Self {
            dims,
            lipschitz_constant,
            rule,
            anchors: Vec::new(),
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz_constant
    }

    pub fn rule(&self) -> ExtensionRule {
        self.rule
    }

    pub fn anchors(&self) -> &[Anchor] {
        &self.anchors
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    /// Same anchors, different extension rule.
    pub fn with_rule(mut self, rule: ExtensionRule) -> Self {
        self.rule = rule;
        self
    }

    /// Clamped upper and lower McShane envelopes at `x`.
    ///
    /// Returns `None` in place of the pair when `x` coincides with an anchor;
    /// the value of the first such anchor is returned instead.
    fn envelopes(&self, x: &[f64]) -> Result<(f64, f64), f64> {
        let l = self.lipschitz_constant;
        let mut upper = f64::INFINITY;
        let mut lower = f64::NEG_INFINITY;
        for a in &self.anchors {
            let d = sup_distance(x, &a.point);
            if d == 0.0 {
                return Err(a.value);
            }
            upper = upper.min(a.value + l * d);
            lower = lower.max(a.value - l * d);
        }
        Ok((upper.clamp(0.0, 1.0), lower.clamp(0.0, 1.0)))
    }

    /// Value at `x` under the function's own rule.
    ///
    /// Total on `[0,1]^d` (and beyond); panics if `x` has the wrong dimension.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.evaluate_with(x, self.rule)
    }

    pub fn evaluate_with(&self, x: &[f64], rule: ExtensionRule) -> f64 {
        assert_eq!(x.len(), self.dims, "evaluation point has wrong dimension");
        match self.envelopes(x) {
            Err(anchor_value) => anchor_value,
            Ok((upper, lower)) => match rule {
                ExtensionRule::UpperMcshane => upper,
                ExtensionRule::LowerMcshane => lower,
                ExtensionRule::Midpoint => 0.5 * (upper + lower),
            },
        }
    }

    /// Value at `x` of the extension pinned to `target` on a constraint set
    /// lying at sup-distance `constraint_distance` from `x`.
    ///
    /// The base value is clamped into the band
    /// `[target - L*dist, target + L*dist]`, and then into `[0,1]`. With no
    /// anchors the result is `target`. Under the upper rule, and when the
    /// anchors are consistent with the constraint, this coincides with
    /// `min(min_j (v_j + L|x - x_j|), target + L*dist)`.
    pub fn evaluate_constrained(&self, x: &[f64], constraint_distance: f64, target: f64) -> f64 {
        let band = self.lipschitz_constant * constraint_distance;
        let base = if self.anchors.is_empty() {
            target
        } else {
            self.evaluate(x)
        };
        let lo = target - band;
        let hi = target + band;
        let v = if base < lo {
            lo
        } else if base > hi {
            hi
        } else {
            base
        };
        v.clamp(0.0, 1.0)
    }

    /// Sum of absolute residuals on labeled samples.
    pub fn l1_loss<'a, I>(&self, samples: I) -> f64
    where
        I: IntoIterator<Item = (&'a [f64], f64)>,
    {
        samples
            .into_iter()
            .map(|(x, y)| (y - self.evaluate(x)).abs())
            .sum()
    }
}

/// An extension of an anchored function that equals a fixed value on a
/// constraint set, described by its sup-norm distance function.
pub struct ConstrainedExtension<D> {
    base: AnchoredLipschitzFn,
    distance: D,
    target: f64,
}

impl<D: Fn(&[f64]) -> f64> ConstrainedExtension<D> {
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.base
            .evaluate_constrained(x, (self.distance)(x), self.target)
    }

    pub fn base(&self) -> &AnchoredLipschitzFn {
        &self.base
    }

    pub fn target(&self) -> f64 {
        self.target
    }
}

/// McShane extension of `anchors` that is pinned to `constraint_value` on the
/// constraint set.
///
/// `constraint_distance(x)` must be the exact sup-norm distance from `x` to the
/// constraint set (`f64::INFINITY` for an empty set). The result is
/// `clamp(min(min_j(v_j + L|x - x_j|), c + L * dist(x)))`.
pub fn mcshane_extend_constrained<D>(
    anchors: Vec<Anchor>,
    lipschitz_constant: f64,
    constraint_distance: D,
    constraint_value: f64,
) -> Result<ConstrainedExtension<D>>
where
    D: Fn(&[f64]) -> f64,
{
    let base = if anchors.is_empty() {
        // dims are irrelevant without anchors; evaluation returns the target
        AnchoredLipschitzFn::empty(1, lipschitz_constant, ExtensionRule::UpperMcshane)?
    } else {
        AnchoredLipschitzFn::new(anchors, lipschitz_constant, ExtensionRule::UpperMcshane)?
    };
    constrained_extension(base, constraint_distance, constraint_value)
}

/// Constrained extension of an already fitted function, evaluated under the
/// function's own rule inside the band (see
/// [`AnchoredLipschitzFn::evaluate_constrained`]).
pub fn constrained_extension<D>(
    base: AnchoredLipschitzFn,
    constraint_distance: D,
    constraint_value: f64,
) -> Result<ConstrainedExtension<D>>
where
    D: Fn(&[f64]) -> f64,
{
    if !(0.0..=1.0).contains(&constraint_value) {
        return Err(invalid("constraint_value", "must lie in [0,1]"));
    }
    let l = base.lipschitz_constant();
    for (i, a) in base.anchors().iter().enumerate() {
        let distance = constraint_distance(&a.point);
        if distance.is_nan() || distance < 0.0 {
            return Err(invalid("constraint_distance", "must be nonnegative"));
        }
        if (a.value - constraint_value).abs() > l * distance + LIPSCHITZ_TOLERANCE {
            return Err(Error::InconsistentConstraints {
                anchor: i,
                value: a.value,
                target: constraint_value,
                distance,
            });
        }
    }
    Ok(ConstrainedExtension {
        base,
        distance: constraint_distance,
        target: constraint_value,
    })
}

/// Largest observed `|g(x) - g(y)| - L |x - y|_inf` over `n_pairs` uniform
/// pairs from `domain`. Nonpositive means no violation was found.
pub fn lipschitz_audit<G>(g: G, lipschitz_constant: f64, domain: &AxisBox, n_pairs: usize, seed: u64) -> f64
where
    G: Fn(&[f64]) -> f64,
{
    assert!(n_pairs >= 1, "n_pairs must be at least 1");
    let mut rng = rng::stream(seed, Stage::Audit);
    let mut worst = f64::NEG_INFINITY;
    for _ in 0..n_pairs {
        let x = domain.sample(&mut rng);
        let y = domain.sample(&mut rng);
        let excess = (g(&x) - g(&y)).abs() - lipschitz_constant * sup_distance(&x, &y);
        worst = worst.max(excess);
    }
    worst
}

/// Audit over explicit pairs, for callers with their own pair distribution.
pub fn lipschitz_audit_pairs<G>(g: G, lipschitz_constant: f64, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64
where
    G: Fn(&[f64]) -> f64,
{
    pairs
        .iter()
        .map(|(x, y)| (g(x) - g(y)).abs() - lipschitz_constant * sup_distance(x, y))
        .fold(f64::NEG_INFINITY, f64::max)
}

/// A random anchored function on `[0,1]^d` with `n_anchors` anchors.
///
/// Values are drawn one at a time uniformly from the interval still allowed by
/// the anchors placed so far, so the result is always L-consistent.
pub fn random_lipschitz_fn<R: Rng + ?Sized>(
    dims: usize,
    lipschitz_constant: f64,
    n_anchors: usize,
    rule: ExtensionRule,
    rng: &mut R,
) -> Result<AnchoredLipschitzFn> {
    let domain = AxisBox::unit(dims);
    let mut anchors: Vec<Anchor> = Vec::with_capacity(n_anchors);
    for _ in 0..n_anchors {
        let point = domain.sample(rng);
        let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
        for a in &anchors {
            let reach = lipschitz_constant * sup_distance(&point, &a.point);
            lo = lo.max(a.value - reach);
            hi = hi.min(a.value + reach);
        }
        let value = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        anchors.push(Anchor::new(point, value));
    }
    if anchors.is_empty() {
        AnchoredLipschitzFn::empty(dims, lipschitz_constant, rule)
    } else {
        AnchoredLipschitzFn::new(anchors, lipschitz_constant, rule)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn anchors_1d(pairs: &[(f64, f64)]) -> Vec<Anchor> {
        pairs.iter().map(|&(x, v)| Anchor::new(vec![x], v)).collect()
    }

    #[test]
    fn upper_rule_adds_distance() {
        let f = AnchoredLipschitzFn::new(anchors_1d(&[(0.0, 0.0)]), 1.0, ExtensionRule::UpperMcshane).unwrap();
        assert!((f.evaluate(&[0.3]) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn midpoint_of_symmetric_anchors() {
        let f = AnchoredLipschitzFn::new(anchors_1d(&[(0.0, 0.5), (1.0, 0.5)]), 1.0, ExtensionRule::Midpoint).unwrap();
        assert_eq!(f.evaluate(&[0.5]), 0.5);
    }

    #[test]
    fn three_rules_between_two_zero_anchors() {
        let f = AnchoredLipschitzFn::new(anchors_1d(&[(0.0, 0.0), (1.0, 0.0)]), 1.0, ExtensionRule::Midpoint).unwrap();
        assert_eq!(f.evaluate_with(&[0.5], ExtensionRule::UpperMcshane), 0.5);
        assert_eq!(f.evaluate_with(&[0.5], ExtensionRule::LowerMcshane), 0.0);
        assert_eq!(f.evaluate_with(&[0.5], ExtensionRule::Midpoint), 0.25);
    }

    #[test]
    fn anchors_are_reproduced_under_every_rule() {
        let f = AnchoredLipschitzFn::new(anchors_1d(&[(0.1, 0.2), (0.4, 0.9), (0.9, 0.3)]), 3.0, ExtensionRule::Midpoint)
            .unwrap();
        for rule in [ExtensionRule::UpperMcshane, ExtensionRule::LowerMcshane, ExtensionRule::Midpoint] {
            for a in f.anchors() {
                assert_eq!(f.evaluate_with(&a.point, rule), a.value);
            }
        }
    }

    #[test]
    fn construction_rejects_bad_anchors() {
        let steep = AnchoredLipschitzFn::new(anchors_1d(&[(0.0, 0.0), (0.1, 1.0)]), 2.0, ExtensionRule::Midpoint);
        assert!(matches!(steep, Err(Error::LipschitzViolation { .. })));
        let dup = AnchoredLipschitzFn::new(anchors_1d(&[(0.3, 0.1), (0.3, 0.2)]), 2.0, ExtensionRule::Midpoint);
        assert!(matches!(dup, Err(Error::DuplicateAnchor { .. })));
        let range = AnchoredLipschitzFn::new(anchors_1d(&[(0.3, 1.5)]), 2.0, ExtensionRule::Midpoint);
        assert!(range.is_err());
        let dup_equal = AnchoredLipschitzFn::new(anchors_1d(&[(0.3, 0.2), (0.3, 0.2)]), 2.0, ExtensionRule::Midpoint);
        assert!(dup_equal.is_ok());
        assert!(AnchoredLipschitzFn::new(vec![], 1.0, ExtensionRule::Midpoint).is_err());
    }

    #[test]
    fn empty_function_envelopes() {
        let f = AnchoredLipschitzFn::empty(2, 3.0, ExtensionRule::Midpoint).unwrap();
        assert_eq!(f.evaluate_with(&[0.2, 0.2], ExtensionRule::UpperMcshane), 1.0);
        assert_eq!(f.evaluate_with(&[0.2, 0.2], ExtensionRule::LowerMcshane), 0.0);
        assert_eq!(f.evaluate(&[0.2, 0.2]), 0.5);
    }

    #[test]
    fn constrained_extension_without_anchors_is_the_target() {
        let g = mcshane_extend_constrained(vec![], 4.0, |x: &[f64]| (x[0] - 0.5).abs(), 1.0).unwrap();
        for x in [0.0, 0.2, 0.5, 0.77, 1.0] {
            assert_eq!(g.evaluate(&[x]), 1.0);
        }
    }

    #[test]
    fn constrained_extension_pins_target_and_anchor() {
        // anchor (0.5, 0.4), L = 2, constraint set {x = 0.9}
        let g = mcshane_extend_constrained(anchors_1d(&[(0.5, 0.4)]), 2.0, |x: &[f64]| (x[0] - 0.9).abs(), 1.0).unwrap();
        assert_eq!(g.evaluate(&[0.9]), 1.0);
        assert_eq!(g.evaluate(&[0.5]), 0.4);
        let audit = lipschitz_audit(|x| g.evaluate(x), 2.0, &AxisBox::unit(1), 1000, 11);
        assert!(audit <= 1e-12, "violation {audit}");
    }

    #[test]
    fn constrained_extension_with_box_geometry() {
        // anchor at the center of [0.4,0.6]^2 with value 0; constraint set is the
        // boundary of the square inflated by 1/L, where the value must be 1.
        let l = 5.0;
        let half = 0.1 + 1.0 / l;
        let dist = move |x: &[f64]| {
            x.iter().map(|c| (half - (c - 0.5).abs()).abs()).fold(f64::INFINITY, f64::min)
        };
        let g = mcshane_extend_constrained(vec![Anchor::new(vec![0.5, 0.5], 0.0)], l, dist, 1.0).unwrap();
        assert_eq!(g.evaluate(&[0.5, 0.5]), 0.0);
        assert_eq!(g.evaluate(&[0.5 + half, 0.45]), 1.0);
        assert_eq!(g.evaluate(&[0.55, 0.5 - half]), 1.0);
    }

    #[test]
    fn constrained_extension_rejects_inconsistent_anchor() {
        let res = mcshane_extend_constrained(anchors_1d(&[(0.5, 0.0)]), 1.0, |x: &[f64]| (x[0] - 0.6).abs(), 1.0);
        assert!(matches!(res, Err(Error::InconsistentConstraints { .. })));
    }

    #[test]
    fn upper_rule_band_matches_min_formula() {
        let anchors = anchors_1d(&[(0.3, 0.2), (0.45, 0.5)]);
        let l = 4.0;
        let dist = |x: &[f64]| (x[0] - 0.8).abs().min((x[0] - 0.0).abs() + 0.05);
        let g = mcshane_extend_constrained(anchors.clone(), l, dist, 1.0).unwrap();
        for k in 0..=100 {
            let x = [k as f64 / 100.0];
            let upper = anchors
                .iter()
                .map(|a| a.value + l * (x[0] - a.point[0]).abs())
                .fold(f64::INFINITY, f64::min);
            let direct = upper.min(1.0 + l * dist(&x)).clamp(0.0, 1.0);
            assert!((g.evaluate(&x) - direct).abs() < 1e-12, "x = {}", x[0]);
        }
    }

    #[test]
    fn audit_detects_steep_function() {
        let unit = AxisBox::unit(1);
        assert!(lipschitz_audit(|_| 0.5, 1.0, &unit, 100, 1) <= 0.0);
        assert!(lipschitz_audit(|x| x[0], 1.0, &unit, 1000, 1) <= 1e-9);
        assert!(lipschitz_audit(|x| 2.0 * x[0], 1.0, &unit, 10_000, 1) > 0.0);
    }

    #[test]
    fn audit_is_deterministic() {
        let unit = AxisBox::unit(2);
        let g = |x: &[f64]| (x[0] * 3.0).sin() * 0.5 + 0.5;
        assert_eq!(lipschitz_audit(g, 1.0, &unit, 500, 4), lipschitz_audit(g, 1.0, &unit, 500, 4));
    }

    #[test]
    fn serde_round_trip_revalidates() {
        let f = AnchoredLipschitzFn::new(anchors_1d(&[(0.1, 0.2), (0.4, 0.5)]), 2.0, ExtensionRule::Midpoint).unwrap();
        let text = serde_json::to_string(&f).unwrap();
        let back: AnchoredLipschitzFn = serde_json::from_str(&text).unwrap();
        assert_eq!(back, f);
        let tampered = text.replace("0.5", "0.95");
        assert!(serde_json::from_str::<AnchoredLipschitzFn>(&tampered).is_err());
    }
}
