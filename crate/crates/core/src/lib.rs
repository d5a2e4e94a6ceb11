//! Bayesian phase estimation with products of GHZ states.

pub mod adaptive;
pub mod clock;
pub mod error;
pub mod fit;
pub mod mc;
pub mod noise;
pub mod oqi;
pub mod partitions;
pub mod prior;
pub mod quadrature;
pub mod schemes;
pub mod unwind;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/priors.md")]
    mod priors {}
    #[doc = include_str!("../../../book/src/partitions.md")]
    mod partitions {}
    #[doc = include_str!("../../../book/src/oqi.md")]
    mod oqi {}
    #[doc = include_str!("../../../book/src/adaptive.md")]
    mod adaptive {}
    #[doc = include_str!("../../../book/src/schemes.md")]
    mod schemes {}
    #[doc = include_str!("../../../book/src/noise.md")]
    mod noise {}
    #[doc = include_str!("../../../book/src/unwind.md")]
    mod unwind {}
    #[doc = include_str!("../../../book/src/clock.md")]
    mod clock {}
}
