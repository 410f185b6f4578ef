//! Fixed-target membership-inference games against the empirical mean and
//! its noisy and sub-sampled variants.
//!
//! The crate is organised bottom-up:
//!
//! * [`dist`]: column-wise independent data distributions and their
//!   Mahalanobis geometry.
//! * [`mech`]: the released statistics (exact, noisy and sub-sampled mean).
//! * [`score`]: attack scores thresholded by an adversary.
//! * [`theory`]: closed-form leakage, trade-off and GDP formulas.
//! * [`game`]: the crafter, fixed- and average-target games, ROC estimation.
//! * [`canary`]: reference-moment estimation and Mahalanobis canary choice.
//! * [`whitebox`]: a toy SGD harness with the per-step covariance attack.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod canary;
pub mod dist;
pub mod error;
pub mod game;
pub mod linalg;
pub mod mech;
pub mod rng;
pub mod score;
pub mod theory;
pub mod whitebox;

pub use error::{Error, Result};
