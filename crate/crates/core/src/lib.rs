//! Numerical toolkit for half-line Sturm-Liouville spectral problems with
//! indefinite weights.
//!
//! The crate computes Weyl-Titchmarsh m-coefficients by adaptive integration
//! with Weyl-disk error control, represents Herglotz functions and their
//! spectral measures (Stieltjes transforms, inversion, moment integrals),
//! evaluates similarity/critical-point diagnostics built from the pair
//! (M+, M-), applies the Krein string spectral-shift rule, and reconstructs
//! potentials from spectral data via the Gelfand-Levitan equation with
//! finite-rank kernels.
//!
//! The crate is `no_std`-compatible (with `alloc`); the companion `sl-lab`
//! crate carries the CLI, JSON problem files, and CSV export.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod builtin;
pub mod criteria;
pub mod expr;
pub mod glevitan;
pub mod herglotz;
pub mod krein;
pub mod quad;
pub mod rk;
pub mod weyl;

pub use num_complex::Complex64;
