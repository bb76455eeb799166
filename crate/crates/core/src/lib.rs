//! Local computation for Lipschitz regression and kernel-error estimation.

pub mod constants;
pub mod error;
pub mod estimation;
pub mod experiment;
pub mod geometry;
pub mod io;
pub mod learner;
pub mod lipschitz;
pub mod nw;
pub mod partition;
pub mod properties;
pub mod rng;
pub mod synthetic;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    struct Introduction;
    #[doc = include_str!("../../../book/src/lipschitz.md")]
    struct Lipschitz;
    #[doc = include_str!("../../../book/src/partition.md")]
    struct Partition;
    #[doc = include_str!("../../../book/src/learner.md")]
    struct Learner;
    #[doc = include_str!("../../../book/src/estimation.md")]
    struct Estimation;
    #[doc = include_str!("../../../book/src/nw.md")]
    struct Nw;
    #[doc = include_str!("../../../book/src/cli.md")]
    struct Cli;
}
