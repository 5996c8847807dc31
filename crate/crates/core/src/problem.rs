//! Data model for the three-dataset testing problem and the result containers.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};
use crate::procedures::PruningTrace;

/// Dense row-major real matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    data: Vec<f64>,
    ncols: usize,
}

impl FeatureMatrix {
    pub fn new(data: Vec<f64>, ncols: usize) -> Result<Self> {
        if ncols == 0 {
            return Err(EcotError::Input("feature matrix needs at least one column".into()));
        }
        if data.len() % ncols != 0 {
            return Err(EcotError::Input(format!(
                "{} values do not fill rows of width {ncols}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(EcotError::Input(format!(
                "non-finite feature at row {}, column {}",
                pos / ncols,
                pos % ncols
            )));
        }
        Ok(Self { data, ncols })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R], ncols: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(EcotError::Input(format!(
                    "row {i} has {} columns, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(data, ncols)
    }

    /// Zero-row matrix of the given width.
    pub fn empty(ncols: usize) -> Self {
        Self { data: Vec::new(), ncols: ncols.max(1) }
    }

    pub fn nrows(&self) -> usize {
        self.data.len() / self.ncols
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.ncols)
    }
}

/// Which of the three datasets a global index belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Part {
    Null,
    NonNull,
    Test,
}

/// Labeled null data `D0`, optional labeled non-null data `D1`, and unlabeled
/// test data `Du`.
///
/// Samples share one global index space `[0, n + m)` in the order
/// `D0, D1, Du`: `L0 = 0..n0`, `L1 = n0..n`, `U = n..n+m` with `n = n0 + n1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestingProblem {
    null: FeatureMatrix,
    nonnull: FeatureMatrix,
    test: FeatureMatrix,
}

impl TestingProblem {
    pub fn new(null: FeatureMatrix, nonnull: FeatureMatrix, test: FeatureMatrix) -> Result<Self> {
        let d = null.ncols();
        if test.ncols() != d || (nonnull.nrows() > 0 && nonnull.ncols() != d) {
            return Err(EcotError::Input(format!(
                "column counts differ: D0 has {d}, D1 has {}, Du has {}",
                nonnull.ncols(),
                test.ncols()
            )));
        }
        if null.nrows() == 0 {
            return Err(EcotError::Input("D0 must contain at least one row".into()));
        }
        if test.nrows() == 0 {
            return Err(EcotError::Input("Du must contain at least one row".into()));
        }
        let nonnull = if nonnull.nrows() == 0 { FeatureMatrix::empty(d) } else { nonnull };
        Ok(Self { null, nonnull, test })
    }

    pub fn dim(&self) -> usize {
        self.null.ncols()
    }
    pub fn n0(&self) -> usize {
        self.null.nrows()
    }
    pub fn n1(&self) -> usize {
        self.nonnull.nrows()
    }
    pub fn n(&self) -> usize {
        self.n0() + self.n1()
    }
    pub fn m(&self) -> usize {
        self.test.nrows()
    }
    pub fn total(&self) -> usize {
        self.n() + self.m()
    }

    pub fn null_indices(&self) -> Range<usize> {
        0..self.n0()
    }
    pub fn nonnull_indices(&self) -> Range<usize> {
        self.n0()..self.n()
    }
    pub fn test_indices(&self) -> Range<usize> {
        self.n()..self.total()
    }

    pub fn null_features(&self) -> &FeatureMatrix {
        &self.null
    }
    pub fn nonnull_features(&self) -> &FeatureMatrix {
        &self.nonnull
    }
    pub fn test_features(&self) -> &FeatureMatrix {
        &self.test
    }

    pub fn part(&self, global: usize) -> Part {
        if global < self.n0() {
            Part::Null
        } else if global < self.n() {
            Part::NonNull
        } else {
            assert!(global < self.total(), "global index {global} out of range");
            Part::Test
        }
    }

    pub fn row(&self, global: usize) -> &[f64] {
        match self.part(global) {
            Part::Null => self.null.row(global),
            Part::NonNull => self.nonnull.row(global - self.n0()),
            Part::Test => self.test.row(global - self.n()),
        }
    }

    /// Observed label: `Some(0)` on `L0`, `Some(1)` on `L1`, `None` on `U`.
    pub fn label(&self, global: usize) -> Option<u8> {
        match self.part(global) {
            Part::Null => Some(0),
            Part::NonNull => Some(1),
            Part::Test => None,
        }
    }

    /// Position of a test index inside `U` (`0..m`).
    pub fn test_position(&self, global: usize) -> Result<usize> {
        if self.test_indices().contains(&global) {
            Ok(global - self.n())
        } else {
            Err(EcotError::Domain(format!("index {global} is not a test index")))
        }
    }

    /// Same data with `D1` dropped.
    pub fn without_nonnull(&self) -> Self {
        Self {
            null: self.null.clone(),
            nonnull: FeatureMatrix::empty(self.dim()),
            test: self.test.clone(),
        }
    }
}

/// Calibration indices `C`, each in `L0` (or in `L0 ∪ L1` for pseudo-label
/// p-values).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CalibrationSet {
    indices: Vec<usize>,
}

impl CalibrationSet {
    /// A calibration set drawn from `L0`.
    pub fn null(problem: &TestingProblem, indices: Vec<usize>) -> Result<Self> {
        Self::checked(problem, indices, false)
    }

    /// A calibration set drawn from `L0 ∪ L1`.
    pub fn labeled(problem: &TestingProblem, indices: Vec<usize>) -> Result<Self> {
        Self::checked(problem, indices, true)
    }

    /// `C = L0`.
    pub fn all_null(problem: &TestingProblem) -> Self {
        Self { indices: problem.null_indices().collect() }
    }

    fn checked(problem: &TestingProblem, indices: Vec<usize>, allow_nonnull: bool) -> Result<Self> {
        let mut seen = indices.clone();
        seen.sort_unstable();
        if seen.windows(2).any(|w| w[0] == w[1]) {
            return Err(EcotError::Domain("calibration set has duplicate indices".into()));
        }
        for &i in &indices {
            let ok = i < problem.n0() || (allow_nonnull && i < problem.n());
            if !ok {
                return Err(EcotError::Domain(format!(
                    "calibration index {i} is outside the permitted label set"
                )));
            }
        }
        Ok(Self { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }
    pub fn len(&self) -> usize {
        self.indices.len()
    }
    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }
}

/// How a p-value vector was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reduction {
    FullPermutation,
    CalibrationSymmetric,
    JointSymmetric,
    Jackknife,
    PseudoLabel,
}

/// Per-test-point conformal p-values, in test order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueVector {
    pub values: Vec<f64>,
    pub reduction: Reduction,
}

/// Output of a testing procedure. Indices are global test indices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RejectionReport {
    pub rejected: Vec<usize>,
    pub r_init: Vec<usize>,
    /// `|R_j|` per test point, in test order; empty when the testing step was plain BH.
    pub r_j_sizes: Vec<usize>,
    pub pruned: bool,
    pub null_prop_estimate: Option<f64>,
    pub seed: u64,
    pub pruning: Option<PruningTrace>,
}

impl RejectionReport {
    pub fn empty(seed: u64) -> Self {
        Self {
            rejected: Vec::new(),
            r_init: Vec::new(),
            r_j_sizes: Vec::new(),
            pruned: false,
            null_prop_estimate: None,
            seed,
            pruning: None,
        }
    }

    /// Report for a plain BH rejection set.
    pub fn from_bh(rejected: Vec<usize>, seed: u64) -> Self {
        Self { r_init: rejected.clone(), rejected, ..Self::empty(seed) }
    }
}

/// False discovery proportion and true positive proportion of a rejection set.
///
/// `labels[t]` is `true` when the `t`-th test point is a non-null. The FDP uses
/// the `1 ∨ |R|` guard, so an empty rejection set has FDP 0.
pub fn fdp_and_power(rejected: &[usize], test_indices: Range<usize>, labels: &[bool]) -> Result<(f64, f64)> {
    if labels.len() != test_indices.len() {
        return Err(EcotError::Domain(format!(
            "{} labels for {} test points",
            labels.len(),
            test_indices.len()
        )));
    }
    let mut false_rej = 0usize;
    let mut true_rej = 0usize;
    for &j in rejected {
        if !test_indices.contains(&j) {
            return Err(EcotError::Domain(format!("rejected index {j} is outside U")));
        }
        if labels[j - test_indices.start] {
            true_rej += 1;
        } else {
            false_rej += 1;
        }
    }
    let nonnull = labels.iter().filter(|&&l| l).count();
    let fdp = false_rej as f64 / rejected.len().max(1) as f64;
    let tpp = true_rej as f64 / nonnull.max(1) as f64;
    Ok((fdp, tpp))
}

/// Empirical FDR and power over Monte Carlo replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub replicates: usize,
    pub fdr_mean: f64,
    pub fdr_se: f64,
    pub power_mean: f64,
    pub power_se: f64,
    pub per_replicate: Vec<(f64, f64)>,
}

impl MonteCarloReport {
    /// Aggregates `(fdp, tpp)` pairs; SE is the sample standard deviation over `sqrt(R)`.
    pub fn from_replicates(per_replicate: Vec<(f64, f64)>) -> Result<Self> {
        let r = per_replicate.len();
        if r == 0 {
            return Err(EcotError::Parameter("at least one replicate is required".into()));
        }
        let (fdr_mean, fdr_se) = mean_se(per_replicate.iter().map(|p| p.0), r);
        let (power_mean, power_se) = mean_se(per_replicate.iter().map(|p| p.1), r);
        Ok(Self { replicates: r, fdr_mean, fdr_se, power_mean, power_se, per_replicate })
    }
}

fn mean_se(values: impl Iterator<Item = f64> + Clone, r: usize) -> (f64, f64) {
    let mean = values.clone().sum::<f64>() / r as f64;
    if r < 2 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}
