//! Numerical toolkit for kappa-homogeneous hypoelliptic operators on
//! periodic grids.
//!
//! * [`index_algebra`]: multi-indices, anisotropic distance and dilations,
//!   the index sets `A`, `B`, `A'`.
//! * [`symbol_analysis`]: symbols, homogeneity and ellipticity certificates,
//!   rational multipliers.
//! * [`dyadic_decomposition`]: Littlewood-Paley blocks and Mihlin constants.
//! * [`spectral_solver`]: FFT multipliers, constant-coefficient solves, the
//!   parametrix and the Neumann iteration.
//! * [`oscillation_metrics`]: moduli of continuity, Dini integrals,
//!   seminorms and Campanato quantities.
//! * [`estimate_harness`]: end-to-end measurements of the a priori estimates.

pub mod dyadic_decomposition;
pub mod error;
pub mod estimate_harness;
pub mod index_algebra;
pub mod oscillation_metrics;
pub mod spectral_solver;
pub mod symbol_analysis;

pub use error::{Error, Result};
pub use index_algebra::{IndexSetPair, KappaWeight, MultiIndex};
pub use spectral_solver::{GridField, GridSpec};
pub use symbol_analysis::{Coefficient, OperatorSpec};

/// Crate version embedded in reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
