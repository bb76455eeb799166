//! Random-offset alternating partitions of `[0,1]^d`.
//!
//! Each axis is cut into intervals that alternate between a long and a short
//! length, starting at a random offset. A cell is the product of one interval
//! per axis; it is a long box when every one of its intervals is long and a
//! short box otherwise.
//!
//! Two schemes are provided:
//!
//! * [`Scheme::Interval`], for the one-dimensional learner: short length `1/L`,
//!   long length `1/(L eps)`, first boundary `k/L` with `k` in `1..=floor(1/eps)`.
//! * [`Scheme::Grid`], for the box learner: short length `2/L`, long length
//!   `d/(L eps)`, first boundary `2k/L` with `k` in `0..=floor(d/(2 eps))`.
//!
//! The interval `[0, b_1]` is a (possibly truncated) long slot, followed by a
//! short one, and so on; the last interval is cut at 1. Truncated intervals keep
//! the kind of their slot. When `b_1 = 0` the empty first slot is dropped and
//! the first interval is short.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::AxisBox;
use crate::rng::{self, Stage};
use crate::synthetic::{Marginal, PointSampler};

/// Boundaries within this distance of 1 are snapped to 1.
const SNAP: f64 = 1e-9;
/// Slack for the integer offset ranges and the scale check.
const GRID_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Interval,
    Grid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntervalKind {
    Long,
    Short,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    LongBox,
    ShortBox,
}

/// A cell of the partition: one interval index per dimension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellId {
    pub index: Vec<usize>,
    pub kind: CellKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPartition", into = "RawPartition")]
pub struct Partition {
    dims: usize,
    lipschitz_constant: f64,
    epsilon: f64,
    scheme: Scheme,
    offset_indices: Vec<usize>,
    offsets: Vec<f64>,
    boundaries: Vec<Vec<f64>>,
    parity: Vec<Vec<IntervalKind>>,
}

#[derive(Serialize, Deserialize)]
struct RawPartition {
    dims: usize,
    #[serde(rename = "L")]
    lipschitz_constant: f64,
    epsilon: f64,
    scheme: Scheme,
    offsets: Vec<f64>,
    boundaries: Vec<Vec<f64>>,
    parity: Vec<Vec<IntervalKind>>,
}

impl From<Partition> for RawPartition {
    fn from(p: Partition) -> Self {
        RawPartition {
            dims: p.dims,
            lipschitz_constant: p.lipschitz_constant,
            epsilon: p.epsilon,
            scheme: p.scheme,
            offsets: p.offsets,
            boundaries: p.boundaries,
            parity: p.parity,
        }
    }
}

impl TryFrom<RawPartition> for Partition {
    type Error = Error;

    fn try_from(raw: RawPartition) -> Result<Self> {
        let step = offset_step(raw.scheme, raw.lipschitz_constant);
        let indices = raw
            .offsets
            .iter()
            .map(|&b| {
                let k = (b / step).round();
                if k >= 0.0 && (k * step - b).abs() <= GRID_SLACK {
                    Ok(k as usize)
                } else {
                    Err(Error::Parse(format!("offset {b} is not on the offset grid")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let rebuilt = Partition::with_offsets(raw.lipschitz_constant, raw.epsilon, raw.dims, raw.scheme, &indices)?;
        let same_cuts = rebuilt.boundaries.len() == raw.boundaries.len()
            && rebuilt.boundaries.iter().zip(&raw.boundaries).all(|(a, b)| {
                a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= 1e-12)
            });
        if !same_cuts || rebuilt.parity != raw.parity {
            return Err(Error::Parse(
                "boundaries or parity do not match the stated offsets".into(),
            ));
        }
        Ok(rebuilt)
    }
}

fn offset_step(scheme: Scheme, l: f64) -> f64 {
    match scheme {
        Scheme::Interval => 1.0 / l,
        Scheme::Grid => 2.0 / l,
    }
}

fn lengths(scheme: Scheme, l: f64, epsilon: f64, dims: usize) -> (f64, f64) {
    match scheme {
        Scheme::Interval => (1.0 / l, 1.0 / (l * epsilon)),
        Scheme::Grid => (2.0 / l, dims as f64 / (l * epsilon)),
    }
}

/// Admissible offset indices of a scheme, as an inclusive range.
pub fn offset_index_range(scheme: Scheme, epsilon: f64, dims: usize) -> (usize, usize) {
    match scheme {
        Scheme::Interval => (1, (1.0 / epsilon + GRID_SLACK).floor().max(1.0) as usize),
        Scheme::Grid => (0, (dims as f64 / (2.0 * epsilon) + GRID_SLACK).floor() as usize),
    }
}

fn check_parameters(l: f64, epsilon: f64, dims: usize) -> Result<()> {
    if !(l.is_finite() && l > 0.0) {
        return Err(invalid("L", format!("must be finite and positive, got {l}")));
    }
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::InvalidEpsilon(epsilon));
    }
    if dims == 0 {
        return Err(invalid("dims", "must be at least 1"));
    }
    Ok(())
}

/// Cuts one axis. Returns the boundaries and the kind of each interval.
fn axis_cuts(first: f64, short: f64, long: f64) -> (Vec<f64>, Vec<IntervalKind>) {
    let mut cuts = vec![0.0];
    let mut kinds = Vec::new();
    let period = short + long;
    let mut push = |b: f64, kind: IntervalKind, cuts: &mut Vec<f64>| -> bool {
        if b >= 1.0 - SNAP {
            cuts.push(1.0);
            kinds.push(kind);
            true
        } else {
            cuts.push(b);
            kinds.push(kind);
            false
        }
    };
    if first > 0.0 && push(first, IntervalKind::Long, &mut cuts) {
        return (cuts, kinds);
    }
    for m in 0.. {
        let start = first + m as f64 * period;
        if push(start + short, IntervalKind::Short, &mut cuts) {
            break;
        }
        if push(start + period, IntervalKind::Long, &mut cuts) {
            break;
        }
    }
    (cuts, kinds)
}

/// Builds a partition with offsets drawn uniformly from the scheme's offset
/// set. One dimension uses [`Scheme::Interval`], higher dimensions
/// [`Scheme::Grid`].
pub fn preprocess(lipschitz_constant: f64, epsilon: f64, dims: usize, seed: u64) -> Result<Partition> {
    let scheme = if dims == 1 { Scheme::Interval } else { Scheme::Grid };
    preprocess_with_scheme(lipschitz_constant, epsilon, dims, scheme, seed)
}

pub fn preprocess_with_scheme(
    lipschitz_constant: f64,
    epsilon: f64,
    dims: usize,
    scheme: Scheme,
    seed: u64,
) -> Result<Partition> {
    check_parameters(lipschitz_constant, epsilon, dims)?;
    let (lo, hi) = offset_index_range(scheme, epsilon, dims);
    let mut rng = rng::stream(seed, Stage::PartitionOffsets);
    let indices: Vec<usize> = (0..dims).map(|_| rng.gen_range(lo..=hi)).collect();
    Partition::with_offsets(lipschitz_constant, epsilon, dims, scheme, &indices)
}

impl Partition {
    /// Builds the partition for explicit offset indices (one per dimension).
    ///
    /// Fails with [`Error::DegenerateScale`] unless every admissible offset
    /// leaves room for a full short and a full long interval after it.
    pub fn with_offsets(
        lipschitz_constant: f64,
        epsilon: f64,
        dims: usize,
        scheme: Scheme,
        offset_indices: &[usize],
    ) -> Result<Self> {
        check_parameters(lipschitz_constant, epsilon, dims)?;
        if offset_indices.len() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                got: offset_indices.len(),
            });
        }
        let (short, long) = lengths(scheme, lipschitz_constant, epsilon, dims);
        let step = offset_step(scheme, lipschitz_constant);
        let (lo, hi) = offset_index_range(scheme, epsilon, dims);
        let required = hi as f64 * step + short + long;
        if required > 1.0 + GRID_SLACK {
            return Err(Error::DegenerateScale {
                long_len: long,
                required,
            });
        }
        let mut offsets = Vec::with_capacity(dims);
        let mut boundaries = Vec::with_capacity(dims);
        let mut parity = Vec::with_capacity(dims);
        for &k in offset_indices {
            if k < lo || k > hi {
                return Err(invalid("offsets", format!("index {k} outside {lo}..={hi}")));
            }
            let b1 = k as f64 * step;
            let (cuts, kinds) = axis_cuts(b1, short, long);
            offsets.push(b1);
            boundaries.push(cuts);
            parity.push(kinds);
        }
        Ok(Self {
            dims,
            lipschitz_constant,
            epsilon,
            scheme,
            offset_indices: offset_indices.to_vec(),
            offsets,
            boundaries,
            parity,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn lipschitz_constant(&self) -> f64 {
        self.lipschitz_constant
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn offsets(&self) -> &[f64] {
        &self.offsets
    }

    pub fn offset_indices(&self) -> &[usize] {
        &self.offset_indices
    }

    pub fn short_len(&self) -> f64 {
        lengths(self.scheme, self.lipschitz_constant, self.epsilon, self.dims).0
    }

    pub fn long_len(&self) -> f64 {
        lengths(self.scheme, self.lipschitz_constant, self.epsilon, self.dims).1
    }

    pub fn boundaries(&self, dim: usize) -> &[f64] {
        &self.boundaries[dim]
    }

    pub fn parity(&self, dim: usize) -> &[IntervalKind] {
        &self.parity[dim]
    }

    pub fn n_intervals(&self, dim: usize) -> usize {
        self.parity[dim].len()
    }

    pub fn interval(&self, dim: usize, index: usize) -> (f64, f64) {
        (self.boundaries[dim][index], self.boundaries[dim][index + 1])
    }

    pub fn interval_kind(&self, dim: usize, index: usize) -> IntervalKind {
        self.parity[dim][index]
    }

    /// Index of the interval of axis `dim` containing `v`. Boundaries belong to
    /// the interval on their right, except 1, which belongs to the last one.
    pub fn locate_coordinate(&self, dim: usize, v: f64) -> usize {
        let cuts = &self.boundaries[dim];
        let i = cuts.partition_point(|&b| b <= v);
        i.saturating_sub(1).min(cuts.len() - 2)
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: x.len(),
            });
        }
        for (index, &value) in x.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::OutOfDomain { index, value });
            }
        }
        Ok(())
    }

    /// The cell containing `x`.
    pub fn locate(&self, x: &[f64]) -> Result<CellId> {
        self.check_point(x)?;
        Ok(self.locate_unchecked(x))
    }

    pub(crate) fn locate_unchecked(&self, x: &[f64]) -> CellId {
        let index: Vec<usize> = x.iter().enumerate().map(|(d, &v)| self.locate_coordinate(d, v)).collect();
        self.cell(index)
    }

    /// The cell with the given interval indices.
    pub fn cell(&self, index: Vec<usize>) -> CellId {
        let long = index
            .iter()
            .enumerate()
            .all(|(d, &i)| self.parity[d][i] == IntervalKind::Long);
        CellId {
            index,
            kind: if long { CellKind::LongBox } else { CellKind::ShortBox },
        }
    }

    /// The box of a cell.
    pub fn cell_box(&self, cell: &CellId) -> AxisBox {
        let (lo, hi) = cell
            .index
            .iter()
            .enumerate()
            .map(|(d, &i)| self.interval(d, i))
            .unzip();
        AxisBox { lo, hi }
    }

    fn check_long(&self, cell: &CellId) -> Result<()> {
        if cell.index.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: cell.index.len(),
            });
        }
        let long = cell
            .index
            .iter()
            .enumerate()
            .all(|(d, &i)| i < self.n_intervals(d) && self.parity[d][i] == IntervalKind::Long);
        if long {
            Ok(())
        } else {
            Err(Error::NotLongBox(cell.index.clone()))
        }
    }

    /// The long box inflated by `1/L` on every side, clamped to `[0,1]^d`.
    pub fn extension_box(&self, cell: &CellId) -> Result<AxisBox> {
        self.check_long(cell)?;
        let r = 1.0 / self.lipschitz_constant;
        let b = self.cell_box(cell);
        Ok(AxisBox {
            lo: b.lo.iter().map(|v| (v - r).max(0.0)).collect(),
            hi: b.hi.iter().map(|v| (v + r).min(1.0)).collect(),
        })
    }

    /// Midplanes of the short intervals on either side of long interval
    /// `index` of axis `dim`, or `None` where the long interval touches the
    /// domain edge.
    pub fn midplanes(&self, dim: usize, index: usize) -> (Option<f64>, Option<f64>) {
        let half = self.short_len() / 2.0;
        let (lo, hi) = self.interval(dim, index);
        let below = (index > 0).then_some(lo - half);
        let above = (index + 1 < self.n_intervals(dim)).then_some(hi + half);
        (below, above)
    }

    /// Sup-norm distance from `x` to the set where the extension of a long
    /// box is pinned to 1: the union of the midplanes of the neighbouring
    /// short intervals. `f64::INFINITY` if the box has no short neighbour.
    ///
    /// Midplanes sit half a nominal short length away from the box, also next
    /// to a short interval truncated at the domain edge.
    pub fn constraint_distance(&self, cell: &CellId, x: &[f64]) -> Result<f64> {
        self.check_long(cell)?;
        if x.len() != self.dims {
            return Err(Error::DimensionMismatch {
                expected: self.dims,
                got: x.len(),
            });
        }
        Ok(self.constraint_distance_unchecked(cell, x))
    }

    pub(crate) fn constraint_distance_unchecked(&self, cell: &CellId, x: &[f64]) -> f64 {
        let mut best = f64::INFINITY;
        for (d, &i) in cell.index.iter().enumerate() {
            let (below, above) = self.midplanes(d, i);
            for m in [below, above].into_iter().flatten() {
                best = best.min((x[d] - m).abs());
            }
        }
        best
    }

    /// Monte-Carlo estimate of the probability of the short boxes.
    pub fn short_mass<S: PointSampler + ?Sized>(&self, sampler: &S, n: usize, seed: u64) -> f64 {
        assert!(n >= 1, "n must be at least 1");
        let mut rng = rng::stream(seed, Stage::ShortMass);
        let hits = (0..n)
            .filter(|_| {
                let x = sampler.sample_x(&mut rng);
                self.locate_unchecked(&x).kind == CellKind::ShortBox
            })
            .count();
        hits as f64 / n as f64
    }

    /// Length of `[lo, hi]` covered by short intervals of axis `dim`.
    fn short_length_within(&self, dim: usize, lo: f64, hi: f64) -> f64 {
        let cuts = &self.boundaries[dim];
        self.parity[dim]
            .iter()
            .enumerate()
            .filter(|(_, k)| **k == IntervalKind::Short)
            .map(|(i, _)| (cuts[i + 1].min(hi) - cuts[i].max(lo)).max(0.0))
            .sum()
    }

    /// Short-box probability of the uniform distribution on `region`.
    pub fn short_mass_of_box(&self, region: &AxisBox) -> f64 {
        let mut long_prob = 1.0;
        for d in 0..self.dims {
            let (lo, hi) = (region.lo[d], region.hi[d]);
            let frac = if hi > lo {
                self.short_length_within(d, lo, hi) / (hi - lo)
            } else {
                let i = self.locate_coordinate(d, lo);
                if self.parity[d][i] == IntervalKind::Short {
                    1.0
                } else {
                    0.0
                }
            };
            long_prob *= 1.0 - frac;
        }
        1.0 - long_prob
    }

    /// Exact short-box probability under a marginal.
    pub fn short_mass_exact(&self, marginal: &Marginal) -> f64 {
        match marginal {
            Marginal::Uniform { .. } => self.short_mass_of_box(&AxisBox::unit(self.dims)),
            Marginal::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                components
                    .iter()
                    .map(|c| c.weight * self.short_mass_of_box(&c.region))
                    .sum::<f64>()
                    / total
            }
            Marginal::Pointset { points } => {
                let short = points
                    .iter()
                    .filter(|p| self.locate_unchecked(p).kind == CellKind::ShortBox)
                    .count();
                short as f64 / points.len() as f64
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn interval_scheme_with_second_offset() {
        let p = Partition::with_offsets(10.0, 0.5, 1, Scheme::Interval, &[2]).unwrap();
        assert!(close(p.offsets()[0], 0.2));
        let expected = [0.0, 0.2, 0.3, 0.5, 0.6, 0.8, 0.9, 1.0];
        let got = p.boundaries(0);
        assert_eq!(got.len(), expected.len());
        for (g, e) in got.iter().zip(expected) {
            assert!(close(*g, e), "{got:?}");
        }
        use IntervalKind::*;
        assert_eq!(p.parity(0), &[Long, Short, Long, Short, Long, Short, Long]);
        assert!(close(p.short_len(), 0.1));
        assert!(close(p.long_len(), 0.2));
    }

    #[test]
    fn scale_too_coarse_is_degenerate() {
        assert!(matches!(preprocess(4.0, 0.5, 1, 0), Err(Error::DegenerateScale { .. })));
        assert!(preprocess(10.0, 0.5, 1, 0).is_ok());
        assert!(matches!(preprocess(10.0, 1.5, 1, 0), Err(Error::InvalidEpsilon(_))));
    }

    #[test]
    fn grid_scheme_zero_offset_starts_short() {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[0, 2]).unwrap();
        assert_eq!(p.parity(0)[0], IntervalKind::Short);
        assert!(close(p.boundaries(0)[1], 0.1));
        assert_eq!(p.parity(1)[0], IntervalKind::Long);
        assert!(close(p.boundaries(1)[1], 0.2));
        assert!(close(p.long_len(), 0.25));
    }

    #[test]
    fn locate_tie_breaks() {
        let p = Partition::with_offsets(10.0, 0.5, 1, Scheme::Interval, &[2]).unwrap();
        assert_eq!(p.locate(&[0.0]).unwrap().index, vec![0]);
        let c = p.locate(&[0.25]).unwrap();
        assert_eq!(c.index, vec![1]);
        assert_eq!(c.kind, CellKind::ShortBox);
        assert_eq!(p.locate(&[0.2]).unwrap().index, vec![1]);
        assert_eq!(p.locate(&[1.0]).unwrap().index, vec![6]);
        assert!(matches!(p.locate(&[1.01]), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn short_in_any_dimension_is_short_box() {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[2, 2]).unwrap();
        // [0,0.2] long, [0.2,0.3] short
        assert_eq!(p.locate(&[0.1, 0.1]).unwrap().kind, CellKind::LongBox);
        assert_eq!(p.locate(&[0.1, 0.25]).unwrap().kind, CellKind::ShortBox);
    }

    #[test]
    fn extension_boxes() {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[2, 2]).unwrap();
        let first = p.locate(&[0.1, 0.1]).unwrap();
        let e = p.extension_box(&first).unwrap();
        assert_eq!(e.lo, vec![0.0, 0.0]);
        assert!(close(e.hi[0], 0.25));
        let next = p.locate(&[0.4, 0.1]).unwrap();
        let e2 = p.extension_box(&next).unwrap();
        // neighbours meet on the midplane of the short slab [0.2,0.3]
        assert!(close(e2.lo[0], 0.25));
        let short = p.locate(&[0.25, 0.1]).unwrap();
        assert!(matches!(p.extension_box(&short), Err(Error::NotLongBox(_))));
    }

    #[test]
    fn constraint_distances() {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[2, 2]).unwrap();
        let inner = p.locate(&[0.4, 0.4]).unwrap();
        let (lo, hi) = p.interval(0, inner.index[0]);
        let center = [(lo + hi) / 2.0; 2];
        let d = p.constraint_distance(&inner, &center).unwrap();
        assert!(close(d, p.long_len() / 2.0 + 0.05));
        assert!(close(p.constraint_distance(&inner, &[hi + 0.05, 0.4]).unwrap(), 0.0));
        let corner = p.locate(&[0.05, 0.05]).unwrap();
        assert!(close(p.constraint_distance(&corner, &[0.0, 0.0]).unwrap(), 0.25));
    }

    #[test]
    fn edge_long_interval_has_one_midplane() {
        let p = Partition::with_offsets(10.0, 0.5, 1, Scheme::Interval, &[1]).unwrap();
        let cell = p.locate(&[0.05]).unwrap();
        assert_eq!(p.midplanes(0, 0).0, None);
        assert!(close(p.constraint_distance(&cell, &[0.0]).unwrap(), 0.15));
    }

    #[test]
    fn uniform_short_mass() {
        let p = Partition::with_offsets(10.0, 0.5, 1, Scheme::Interval, &[2]).unwrap();
        let exact = p.short_mass_exact(&Marginal::Uniform { dims: 1 });
        assert!(close(exact, 0.3));
        let mc = p.short_mass(&Marginal::Uniform { dims: 1 }, 20_000, 9);
        assert!((mc - 0.3).abs() < 3.0 * (0.3_f64 * 0.7 / 20_000.0).sqrt() + 1e-3);
    }

    #[test]
    fn two_dimensional_short_mass_is_inclusion_exclusion() {
        let p = Partition::with_offsets(20.0, 0.4, 2, Scheme::Grid, &[1, 2]).unwrap();
        let frac: Vec<f64> = (0..2).map(|d| p.short_length_within(d, 0.0, 1.0)).collect();
        let expected = 1.0 - (1.0 - frac[0]) * (1.0 - frac[1]);
        assert!(close(p.short_mass_exact(&Marginal::Uniform { dims: 2 }), expected));
        let mc = p.short_mass(&Marginal::Uniform { dims: 2 }, 40_000, 3);
        assert!((mc - expected).abs() < 0.015);
    }

    #[test]
    fn point_mass_in_long_box() {
        let p = Partition::with_offsets(10.0, 0.5, 1, Scheme::Interval, &[2]).unwrap();
        let m = Marginal::Pointset { points: vec![vec![0.4]] };
        assert_eq!(p.short_mass(&m, 100, 1), 0.0);
        assert_eq!(p.short_mass_exact(&m), 0.0);
    }

    #[test]
    fn json_round_trip() {
        let p = preprocess(20.0, 0.4, 2, 17).unwrap();
        let text = p.to_json().unwrap();
        assert!(text.contains("\"L\""));
        assert_eq!(Partition::from_json(&text).unwrap(), p);
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let mut bad = v.clone();
        bad["boundaries"][0][1] = serde_json::json!(0.123);
        assert!(serde_json::from_value::<Partition>(bad).is_err());
    }

    #[test]
    fn preprocess_is_deterministic() {
        assert_eq!(preprocess(50.0, 0.2, 1, 5).unwrap(), preprocess(50.0, 0.2, 1, 5).unwrap());
    }
}
