//! Distributed differential privacy with Skellam and discrete-Gaussian
//! mixture noise.
//!
//! Participants rotate, scale and clip their vectors, randomly round each
//! coordinate to a neighbouring integer and add integer noise, then a
//! (simulated) secure aggregator reveals only the modular sum. The
//! [`accountant`] turns noise levels into Rényi-DP curves and `(ε, δ)`
//! guarantees; [`math`] holds an independent numeric divergence used to
//! sanity-check every closed-form bound.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod accountant;
pub mod error;
pub mod fl;
pub mod math;
pub mod mechanisms;
pub mod rational;
pub mod rng;
pub mod samplers;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};
pub use rational::Rational;
pub use rng::RandomSource;
pub use samplers::{NoiseSampler, NoiseSpec, SamplingMode};

#[cfg(doctest)]
mod guide {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/sampling.md")]
    mod sampling {}
    #[doc = include_str!("../../../book/src/mixtures.md")]
    mod mixtures {}
    #[doc = include_str!("../../../book/src/accounting.md")]
    mod accounting {}
    #[doc = include_str!("../../../book/src/pipeline.md")]
    mod pipeline {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
}
