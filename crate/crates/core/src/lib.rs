//! Computable objects around `A`-free measures.
//!
//! A constant-coefficient operator `A = sum_alpha A_alpha d^alpha` acting on
//! `R^m`-valued measures has a symbol `A(xi) = sum (2 pi i)^|alpha| A_alpha xi^alpha`
//! and a wave cone, the union over unit frequencies of the kernels of its
//! principal part. The crate provides:
//!
//! * [`operator`]: operators, symbols, the right-hand-side augmentation and the
//!   JSON operator spec format;
//! * [`catalog`]: the curl, higher-gradient, Saint-Venant, divergence and
//!   current-boundary operators, each with a closed-form cone predicate;
//! * [`wavecone`]: kernel bases, cone membership with witnesses or residual
//!   certificates, and the constant-rank check;
//! * [`exterior`]: k-vectors, wedge and interior products, simplicity and
//!   annihilating covectors, discrete currents and their boundary;
//! * [`grid`]: discretized measures, jump and flat-current generators,
//!   Lebesgue splitting, polars, blow-ups, weak `A`-freeness residuals and the
//!   polar-in-cone verification report;
//! * [`multiplier`]: periodic Fourier multipliers, Bessel potentials, the
//!   three-term regularizing decomposition and its diagnostics.

pub mod catalog;
pub mod error;
pub mod exterior;
pub mod grid;
pub mod linalg;
pub mod multiplier;
pub mod operator;
pub mod wavecone;

pub use error::{Error, Result};
pub use operator::{ComplexMatrix, MultiIndex, PdeOperator};

/// Schema identifiers of every file format read or written by the crate.
pub const SCHEMA_VERSIONS: &[(&str, &str)] = &[
    ("operator-spec", "json/1"),
    ("kvector-text", "text/1"),
    ("grid-measure", "GMES1"),
    ("multiplier-scenario", "json/1"),
    ("landscape-csv", "csv/1"),
    ("verify-report-csv", "csv/1"),
];
