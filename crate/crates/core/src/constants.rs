//! Multipliers for the asymptotic sample sizes.
//!
//! Every size the algorithms need is a formula with an unspecified constant in
//! front. The constants default to 1 and can be overridden from a JSON file
//! named by the `LOCLEARN_CONSTANTS` environment variable.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::partition::Scheme;

pub const CONSTANTS_ENV: &str = "LOCLEARN_CONSTANTS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Constants {
    /// Unlabeled pool size multiplier.
    pub pool_size: f64,
    /// Per-cell label cap multiplier.
    pub sample_cap: f64,
    /// Multiplier of `1/eps^2` labeled draws for error estimation.
    pub estimation_samples: f64,
    /// Multiplier of the labeled draws of the kernel error estimator.
    pub nw_samples: f64,
}

impl Default for Constants {
    fn default() -> Self {
        Self {
            pool_size: 1.0,
            sample_cap: 1.0,
            estimation_samples: 1.0,
            nw_samples: 1.0,
        }
    }
}

fn ln_inv(epsilon: f64) -> f64 {
    (1.0 / epsilon).ln()
}

fn at_least_one(v: f64) -> usize {
    if v.is_finite() {
        (v.ceil() as usize).max(1)
    } else {
        usize::MAX
    }
}

impl Constants {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("pool_size", self.pool_size),
            ("sample_cap", self.sample_cap),
            ("estimation_samples", self.estimation_samples),
            ("nw_samples", self.nw_samples),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config {
                    field: format!("constants.{name}"),
                    reason: format!("must be finite and positive, got {v}"),
                });
            }
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Constants = serde_json::from_str(text).map_err(|e| Error::Config {
            field: "constants".into(),
            reason: e.to_string(),
        })?;
        c.validate()?;
        Ok(c)
    }

    /// Reads overrides from the file named by `LOCLEARN_CONSTANTS`, or the
    /// defaults when the variable is unset.
    pub fn from_env() -> Result<Self> {
        match std::env::var_os(CONSTANTS_ENV) {
            None => Ok(Self::default()),
            Some(path) => {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| Error::Io(format!("{}: {e}", path.to_string_lossy())))?;
                Self::from_json(&text)
            }
        }
    }

    /// Unlabeled pool size: `L/eps^4 ln(1/eps)` for the interval scheme,
    /// `(L/eps)^d / eps^3 ln(1/eps)` for the grid scheme.
    pub fn pool_size(&self, scheme: Scheme, lipschitz_constant: f64, epsilon: f64, dims: usize) -> usize {
        let base = match scheme {
            Scheme::Interval => lipschitz_constant / epsilon.powi(4),
            Scheme::Grid => (lipschitz_constant / epsilon).powi(dims as i32) / epsilon.powi(3),
        };
        at_least_one(self.pool_size * base * ln_inv(epsilon))
    }

    /// Labels used per long cell: `1/(2 eps^4) ln(1/eps)` for the interval
    /// scheme, `(1/eps^2) (d/eps^2)^d ln(1/eps)` for the grid scheme.
    pub fn sample_cap(&self, scheme: Scheme, epsilon: f64, dims: usize) -> usize {
        let base = match scheme {
            Scheme::Interval => 1.0 / (2.0 * epsilon.powi(4)),
            Scheme::Grid => (dims as f64 / (epsilon * epsilon)).powi(dims as i32) / (epsilon * epsilon),
        };
        at_least_one(self.sample_cap * base * ln_inv(epsilon))
    }

    /// Most new labels a single query can fetch.
    pub fn per_query_cap(&self, scheme: Scheme, epsilon: f64, dims: usize) -> usize {
        let cap = self.sample_cap(scheme, epsilon, dims);
        match scheme {
            Scheme::Interval => 2 * cap,
            Scheme::Grid => cap,
        }
    }

    /// Labeled draws for error estimation: `1/eps^2`.
    pub fn estimation_samples(&self, epsilon: f64) -> usize {
        at_least_one(self.estimation_samples / (epsilon * epsilon))
    }

    /// Labeled draws for the kernel error estimator:
    /// `(1/eps^2) (d ln(1/eps) + ln(1/delta))`.
    pub fn nw_samples(&self, dims: usize, epsilon: f64, delta: f64) -> usize {
        let base = (dims as f64 * ln_inv(epsilon) + (1.0 / delta).ln()) / (epsilon * epsilon);
        at_least_one(self.nw_samples * base)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes() {
        let c = Constants::default();
        assert_eq!(c.sample_cap(Scheme::Interval, 0.2, 1), 503);
        assert_eq!(c.per_query_cap(Scheme::Interval, 0.2, 1), 1006);
        assert_eq!(c.sample_cap(Scheme::Grid, 0.4, 2), 895);
        assert_eq!(c.estimation_samples(0.2), 25);
        assert_eq!(c.estimation_samples(1.0), 1);
        assert_eq!(c.nw_samples(2, 0.2, 0.1), 139);
        assert_eq!(c.pool_size(Scheme::Interval, 50.0, 0.2, 1), 50_295);
        assert_eq!(c.pool_size(Scheme::Grid, 20.0, 0.4, 2), 35_793);
    }

    #[test]
    fn overrides_scale_sizes() {
        let c = Constants::from_json(r#"{"sample_cap": 0.5}"#).unwrap();
        assert_eq!(c.sample_cap(Scheme::Interval, 0.2, 1), 252);
        assert_eq!(c.pool_size, 1.0);
        assert!(Constants::from_json(r#"{"sample_cap": -1}"#).is_err());
        assert!(Constants::from_json(r#"{"typo": 1}"#).is_err());
    }
}
