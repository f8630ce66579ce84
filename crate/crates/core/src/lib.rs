//! Simulation and verification laboratory for stationary random fields.
//!
//! The crate generates realizations of stationary fields on periodic grids
//! (Gaussian by circulant embedding, Boolean inclusion models, block-i.i.d.
//! fields), transforms them by local functionals, and measures spatial
//! averages, tails, moments, covariances and α-mixing coefficients by Monte
//! Carlo. Predicted bound curves driven by a multiscale weight `π` are
//! evaluated in [`bounds`] and confronted with the estimates; [`oracle`]
//! provides exact enumeration on tiny discrete fields.

#![allow(clippy::needless_range_loop)]

pub mod bounds;
pub mod error;
pub mod estimators;
pub mod fieldgen;
pub mod functionals;
pub mod numeric;
pub mod oracle;
pub mod quad;
pub mod rng;
pub mod weights;

pub use error::{Error, Result};
