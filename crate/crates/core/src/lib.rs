//! Truncated Karhunen-Loeve expansions of square-integrable Levy processes.
//!
//! The eigenbasis on `[0, T]` is the sine family shared with Brownian
//! motion; the coefficient vector `Z^(d)` is infinitely divisible with
//! dependent entries and is sampled through a shot-noise series driven by
//! unit-rate Poisson arrivals.

pub mod error;
pub mod kle_basis;
pub mod levy_models;
pub mod monte_carlo;
pub mod oracle;
pub mod shot_noise;
pub mod special_fn;
pub mod validation;

pub use error::{KleError, Result};
