//! Synthetic labeled distributions over `[0,1]^d x [0,1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::geometry::AxisBox;
use crate::lipschitz::AnchoredLipschitzFn;
use crate::rng::StreamRng;

/// Sampling access to a marginal over `[0,1]^d`.
pub trait PointSampler: Send + Sync {
    fn dims(&self) -> usize;
    fn sample_x(&self, rng: &mut StreamRng) -> Vec<f64>;
}

/// A joint distribution: a marginal plus a (possibly randomized) label rule.
pub trait LabeledDistribution: PointSampler {
    fn label(&self, x: &[f64], rng: &mut StreamRng) -> f64;

    fn sample_pair(&self, rng: &mut StreamRng) -> (Vec<f64>, f64) {
        let x = self.sample_x(rng);
        let y = self.label(&x, rng);
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureComponent {
    #[serde(rename = "box")]
    pub region: AxisBox,
    pub weight: f64,
}

/// Marginal distribution of `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Marginal {
    Uniform { dims: usize },
    /// Weighted mixture of uniform distributions on boxes.
    Mixture { components: Vec<MixtureComponent> },
    /// Uniform over a finite list of points.
    Pointset { points: Vec<Vec<f64>> },
}

impl Marginal {
    pub fn dims(&self) -> usize {
        match self {
            Marginal::Uniform { dims } => *dims,
            Marginal::Mixture { components } => components.first().map_or(0, |c| c.region.dims()),
            Marginal::Pointset { points } => points.first().map_or(0, Vec::len),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let dims = self.dims();
        if dims == 0 {
            return Err(invalid("marginal", "needs at least one dimension and one component or point"));
        }
        let unit = AxisBox::unit(dims);
        match self {
            Marginal::Uniform { .. } => Ok(()),
            Marginal::Mixture { components } => {
                let mut total = 0.0;
                for c in components {
                    if c.region.dims() != dims {
                        return Err(Error::DimensionMismatch {
                            expected: dims,
                            got: c.region.dims(),
                        });
                    }
                    if !(unit.contains(&c.region.lo) && unit.contains(&c.region.hi)) {
                        return Err(invalid("marginal", "mixture boxes must lie in the unit cube"));
                    }
                    if !(c.weight.is_finite() && c.weight >= 0.0) {
                        return Err(invalid("marginal", "mixture weights must be nonnegative"));
                    }
                    total += c.weight;
                }
                if total <= 0.0 {
                    return Err(invalid("marginal", "mixture weights sum to zero"));
                }
                Ok(())
            }
            Marginal::Pointset { points } => {
                for p in points {
                    if p.len() != dims {
                        return Err(Error::DimensionMismatch {
                            expected: dims,
                            got: p.len(),
                        });
                    }
                    if !unit.contains(p) {
                        return Err(invalid("marginal", "points must lie in the unit cube"));
                    }
                }
                Ok(())
            }
        }
    }
}

impl PointSampler for Marginal {
    fn dims(&self) -> usize {
        Marginal::dims(self)
    }

    fn sample_x(&self, rng: &mut StreamRng) -> Vec<f64> {
        match self {
            Marginal::Uniform { dims } => (0..*dims).map(|_| rng.gen::<f64>()).collect(),
            Marginal::Mixture { components } => {
                let total: f64 = components.iter().map(|c| c.weight).sum();
                let mut u = rng.gen::<f64>() * total;
                let mut chosen = &components[components.len() - 1];
                for c in components {
                    if u < c.weight {
                        chosen = c;
                        break;
                    }
                    u -= c.weight;
                }
                chosen.region.sample(rng)
            }
            Marginal::Pointset { points } => points[rng.gen_range(0..points.len())].clone(),
        }
    }
}

/// Label rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    /// `y = f(x)` for a fixed Lipschitz function.
    LipschitzGt { function: AnchoredLipschitzFn },
    Constant { value: f64 },
    /// With probability `rate` the label is a Bernoulli draw with mean
    /// `base(x)`; otherwise it is `base(x)` itself.
    BernoulliNoise { base: Box<Target>, rate: f64 },
    /// `y = 1` when `normal . x >= offset`, else `0`.
    HalfSpace { normal: Vec<f64>, offset: f64 },
}

impl Target {
    pub fn validate(&self, dims: usize) -> Result<()> {
        match self {
            Target::LipschitzGt { function } if function.dims() != dims => Err(Error::DimensionMismatch {
                expected: dims,
                got: function.dims(),
            }),
            Target::LipschitzGt { .. } => Ok(()),
            Target::Constant { value } if (0.0..=1.0).contains(value) => Ok(()),
            Target::Constant { .. } => Err(invalid("target", "constant must lie in [0,1]")),
            Target::BernoulliNoise { base, rate } => {
                if !(0.0..=1.0).contains(rate) {
                    return Err(invalid("target", "noise rate must lie in [0,1]"));
                }
                base.validate(dims)
            }
            Target::HalfSpace { normal, .. } if normal.len() != dims => Err(Error::DimensionMismatch {
                expected: dims,
                got: normal.len(),
            }),
            Target::HalfSpace { .. } => Ok(()),
        }
    }

    pub fn label(&self, x: &[f64], rng: &mut StreamRng) -> f64 {
        match self {
            Target::LipschitzGt { function } => function.evaluate(x),
            Target::Constant { value } => *value,
            Target::BernoulliNoise { base, rate } => {
                let b = base.label(x, rng);
                if rng.gen::<f64>() < *rate {
                    if rng.gen::<f64>() < b {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    b
                }
            }
            Target::HalfSpace { normal, offset } => {
                let s: f64 = normal.iter().zip(x).map(|(w, v)| w * v).sum();
                if s >= *offset {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Whether every label this rule can produce is 0 or 1.
    pub fn is_binary(&self) -> bool {
        match self {
            Target::HalfSpace { .. } => true,
            Target::Constant { value } => *value == 0.0 || *value == 1.0,
            Target::BernoulliNoise { base, rate } => *rate == 1.0 || base.is_binary(),
            Target::LipschitzGt { .. } => false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticDistribution {
    pub marginal: Marginal,
    pub target: Target,
}

impl SyntheticDistribution {
    pub fn new(marginal: Marginal, target: Target) -> Result<Self> {
        marginal.validate()?;
        target.validate(marginal.dims())?;
        Ok(Self { marginal, target })
    }
}

impl PointSampler for SyntheticDistribution {
    fn dims(&self) -> usize {
        self.marginal.dims()
    }

    fn sample_x(&self, rng: &mut StreamRng) -> Vec<f64> {
        self.marginal.sample_x(rng)
    }
}

impl LabeledDistribution for SyntheticDistribution {
    fn label(&self, x: &[f64], rng: &mut StreamRng) -> f64 {
        self.target.label(x, rng)
    }
}

/// Draws `(x, y)` from `dist`; deterministic given the generator state.
pub fn sample_pair<D: LabeledDistribution + ?Sized>(dist: &D, rng: &mut StreamRng) -> (Vec<f64>, f64) {
    dist.sample_pair(rng)
}
