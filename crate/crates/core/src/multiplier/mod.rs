//! Periodic Fourier analysis: multipliers, Bessel potentials, mollifiers and
//! the regularizing decomposition `chi u = T0[chi V] + T1[chi u] + T2[R]`
//! with its weak-(1,1), compactness and Vitali-type diagnostics.
//!
//! Frequencies are in cycles per unit length, matching
//! `f^(xi) = int f(x) exp(-2 pi i x.xi) dx`.

mod diagnostics;
mod experiment;
mod field;
mod regularizer;
mod spec;

pub use diagnostics::{vitali_check, weak11_profile, Region, VitaliVerdict, Weak11Profile};
pub use experiment::{
    aliasing_fraction, bessel_lp_sweep, cutoff, regularization_experiment, ExperimentReport, ExperimentRow, LpSweepRow, Scenario,
    ScenarioKind, ViolationMode,
};
pub use field::PeriodicField;
pub use regularizer::{
    afree_projection, build_regularizer, mihlin_constant, principal_multiplier, MihlinParams, MihlinReport, Regularizer,
};
pub use spec::{apply_multiplier, bessel_multiplier, bessel_potential, mollify, Evaluator, MollifierShape, MollifierSpec, MultiplierSpec};
