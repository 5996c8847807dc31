use std::sync::atomic::{AtomicBool, Ordering};

use serde::{Deserialize, Serialize};

use super::{canonical_rows, fit_one_class, sq_dist, DataView, FitSpec, OneClassLearner, ScoreFactory, ScoreFn, ScoreModel, SymmetryClass};
use crate::error::{EcotError, Result};
use crate::problem::TestingProblem;

/// Weighting kernel `H(X_i, x)` of the localized score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kernel", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Kernel {
    Gaussian { bandwidth: f64 },
    /// `H ≡ 1`; the score becomes the empirical CDF of the base score.
    Constant,
}

impl Kernel {
    fn validate(&self) -> Result<()> {
        match *self {
            Kernel::Gaussian { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(EcotError::Parameter(format!("kernel bandwidth {bandwidth} must be positive")))
            }
            _ => Ok(()),
        }
    }

    fn weight(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Gaussian { bandwidth } => (-sq_dist(a, b) / (2.0 * bandwidth * bandwidth)).exp(),
            Kernel::Constant => 1.0,
        }
    }
}

/// Kernel-localized rank of a base score `S` among the reference rows `C ∪ {j}`:
///
/// `S^(j)(x) = Σ_i H(X_i, x)·1{S(x) ≥ S(X_i)} / Σ_i H(X_i, x)`.
///
/// Reference rows are held in canonical order, so the score is bit-identical
/// under any rearrangement of `C ∪ {j}`. When every kernel weight underflows
/// the score falls back to the unweighted rank and [`fell_back`](Self::fell_back)
/// reports it.
pub struct LocalizedScorer {
    base: ScoreModel,
    kernel: Kernel,
    refs: Vec<(Vec<f64>, f64)>,
    fallback: AtomicBool,
}

impl LocalizedScorer {
    pub fn new(base: ScoreModel, kernel: Kernel, reference_rows: &[&[f64]]) -> Result<Self> {
        kernel.validate()?;
        if reference_rows.is_empty() {
            return Err(EcotError::Domain("localized score needs at least one reference row".into()));
        }
        let refs = canonical_rows(reference_rows)
            .into_iter()
            .map(|r| (r.to_vec(), base.evaluate(r)))
            .collect();
        Ok(Self { base, kernel, refs, fallback: AtomicBool::new(false) })
    }

    /// Whether any evaluation so far needed the unweighted fallback.
    pub fn fell_back(&self) -> bool {
        self.fallback.load(Ordering::Relaxed)
    }
}

impl ScoreFn for LocalizedScorer {
    fn score(&self, x: &[f64]) -> f64 {
        let sx = self.base.evaluate(x);
        let mut num = 0.0;
        let mut den = 0.0;
        for (row, s) in &self.refs {
            let h = self.kernel.weight(row, x);
            den += h;
            if sx >= *s {
                num += h;
            }
        }
        if den > 0.0 {
            return num / den;
        }
        self.fallback.store(true, Ordering::Relaxed);
        let below = self.refs.iter().filter(|(_, s)| sx >= *s).count();
        below as f64 / self.refs.len() as f64
    }
}

/// Builds localized scores from a fixed training part `Dt ⊆ L0` and a
/// calibration part `C ⊆ L0`, on any view of the data.
#[derive(Debug, Clone)]
pub struct LocalizedFactory {
    pub train: Vec<usize>,
    pub calibration: Vec<usize>,
    pub kernel: Kernel,
    pub learner: OneClassLearner,
}

impl ScoreFactory for LocalizedFactory {
    fn build(&self, data: &DataView<'_>, j: usize) -> Result<ScoreModel> {
        let base = fit_one_class(&data.rows(self.train.iter().copied()), &self.learner)?;
        let reference = data.rows(self.calibration.iter().copied().chain(std::iter::once(j)));
        let scorer = LocalizedScorer::new(base, self.kernel, &reference)?;
        Ok(ScoreModel::new(scorer, SymmetryClass::CalibrationSymmetric, FitSpec::new("localized", "S on Dt, reference C ∪ {j}")))
    }
}

/// The localized score `S^(j)` with base score fitted on `train` and
/// reference rows `calibration ∪ {j}`.
pub fn fit_localized(
    problem: &TestingProblem,
    j: usize,
    kernel: Kernel,
    train: &[usize],
    calibration: &[usize],
    learner: &OneClassLearner,
) -> Result<ScoreModel> {
    problem.test_position(j)?;
    if train.iter().chain(calibration).any(|&i| i >= problem.n0()) {
        return Err(EcotError::Domain("localized score splits must lie in L0".into()));
    }
    let factory = LocalizedFactory {
        train: train.to_vec(),
        calibration: calibration.to_vec(),
        kernel,
        learner: learner.clone(),
    };
    factory.build(&DataView::identity(problem), j)
}
