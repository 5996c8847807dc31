//! Conformalized multiple testing with finite-sample FDR control.
//!
//! The crate is organised around the three-step conformal testing pipeline:
//!
//! 1. **Score construction** ([`scorers`]): a non-conformity score `S^(j)` per
//!    test point, built from any mix of labeled null data `D0`, labeled
//!    non-null data `D1` and the unlabeled test data `Du`. Every score model
//!    carries a declared [`SymmetryClass`].
//! 2. **P-value computation** ([`pvalues`]): the permutation conformal p-value
//!    over all rearrangements of the calibration set plus the test point,
//!    together with the closed rank formulas that replace it when the score is
//!    calibration-symmetric, joint-symmetric or jackknife-type.
//! 3. **Testing** ([`procedures`]): Benjamini-Hochberg and conditional
//!    calibration with randomized pruning, optionally weighted by a
//!    null-proportion estimate.
//!
//! [`methods`] assembles the named procedures (ECOT-bi, ECOT-oc, ECOT-as and
//! the split-conformal baselines), [`oracle`] holds brute-force reference
//! implementations used to verify every reduction, and [`sim`] provides the
//! synthetic scenarios and the Monte Carlo harness.
//!
//! All samples are addressed by a single global index in the order
//! `D0, D1, Du`; see [`TestingProblem`].

pub mod error;
pub mod methods;
pub mod oracle;
pub mod problem;
pub mod procedures;
pub mod pvalues;
pub mod rng;
pub mod scorers;
pub mod sim;

pub use error::{EcotError, Result};
pub use problem::{
    fdp_and_power, CalibrationSet, FeatureMatrix, MonteCarloReport, PValueVector, Part,
    Reduction, RejectionReport, TestingProblem,
};
pub use scorers::{ScoreModel, SymmetryClass};
