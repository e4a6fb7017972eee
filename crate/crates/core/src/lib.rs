//! Exponential tilts, Edgeworth-corrected densities and conditional-law
//! approximations for sums of light-tailed variables conditioned on extreme
//! values of their mean, with convolution and Monte Carlo oracles.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod cli;
pub mod edgeworth;
pub mod error;
pub mod exceedance;
pub mod gibbs;
pub mod model;
pub mod oracle;
pub mod quad;
pub mod roots;
pub mod special;
pub mod tilt;
pub mod validate;

pub use error::{Error, Result};
pub use model::{DensityModel, ModelSpec, VariationClass, VariationKind};
