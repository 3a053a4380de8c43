//! Numerical laboratory for scalar SDEs with drift-perturbed, asymptotically
//! constant diffusion.
//!
//! The crate provides, end to end: hypothesis validation for the model
//! class ([`model`]), squared-Bessel transition laws and tail estimates
//! ([`special`]), scale/speed classification with Feller and Motoo tests
//! ([`diffusion`]), coupled Euler–Maruyama simulation on a shared driver
//! ([`sim`]), and the long-horizon growth statistics that tie them together
//! ([`stats`]), centred on the iterated-logarithm envelope
//! limsup |X(t)| / √(2t log log t) = |σ|.

// Negated comparisons like `!(x > 0.0)` are used deliberately so that NaN
// arguments fail validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diffusion;
pub mod error;
pub mod model;
pub mod quad;
pub mod sim;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
