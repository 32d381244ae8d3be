//! Gaussian process regression with Gauss-Legendre quadrature features.
//!
//! The library approximates stationary and semigroup kernels by a tensorized
//! Gauss-Legendre discretization of their spectral integral. The feature
//! matrix does not depend on the hyperparameters, so likelihood evaluation
//! and its gradient cost `O(s^3 + ns)` after a one-time `O(ns^2)` build.

pub mod api;
pub mod bounds;
pub mod config;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiment;
pub mod features;
pub mod gpr;
pub mod hyperopt;
pub mod integrate;
pub mod kernels;
pub mod persist;
pub mod quadrature;
pub mod special;

pub use error::{GlfError, Result};
