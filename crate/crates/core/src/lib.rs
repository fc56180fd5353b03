//! Eigenspaces of eigenvalue clusters by rational-filter subspace iteration,
//! with a posteriori gap estimation assembled from source-problem error
//! estimators.
//!
//! The crate is organised bottom-up:
//!
//! * [`filters`] – rational filters `r(z) = ω₀ + Σ ωⱼ/(zⱼ − z)`, contour
//!   (Butterworth) and Cayley constructions, inverse images.
//! * [`dense_oracle`] – dense ground truth: generalized eigenspaces, `r(A)`,
//!   Riesz projectors, and brute-force checks of the spectral mapping.
//! * [`mesh`] – conforming triangulations, greedy marking and longest-edge
//!   bisection.
//! * [`fem`] – Lagrange and Raviart–Thomas spaces, Galerkin and
//!   least-squares resolvents.
//! * [`estimators`] – source-problem error estimators with a localizable
//!   `Y` inner product.
//! * [`feast`] – filtered subspace iteration with Rayleigh–Ritz extraction.
//! * [`cluster_gap`] – the cluster gap estimator, subspace gaps and
//!   Hausdorff distances.
//!
//! Data-parallel loops (pole solves, estimator applications, randomized
//! batteries) go through [`exec::Exec`], which uses rayon when the
//! `parallel` feature is enabled and runs sequentially otherwise.

pub mod cluster_gap;
pub mod dense_oracle;
pub mod error;
pub mod estimators;
pub mod exec;
pub mod feast;
pub mod fem;
pub mod filters;
pub mod linalg;
pub mod mesh;
pub mod sparse;

pub use error::{Error, Result};
pub use num_complex::Complex64 as c64;

/// `i`, the imaginary unit.
pub const I: c64 = c64::new(0.0, 1.0);
