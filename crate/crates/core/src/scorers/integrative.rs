use std::sync::Arc;

use rand::seq::SliceRandom;

use super::{fit_one_class, DataView, FitSpec, OneClassLearner, ScoreFactory, ScoreFn, ScoreModel, SymmetryClass};
use crate::error::{EcotError, Result};
use crate::problem::TestingProblem;
use crate::rng::{derive_seed, stream, Stream};

/// Seeded split of `indices` into `(train, rest)`, both sorted.
///
/// The train part has `round(fraction · n)` elements, clamped to
/// `[min_train, n]`.
pub fn split_indices(indices: &[usize], fraction: f64, seed: u64, min_train: usize) -> (Vec<usize>, Vec<usize>) {
    let mut shuffled = indices.to_vec();
    shuffled.shuffle(&mut stream(seed, Stream::Split));
    let n = shuffled.len();
    let k = ((fraction * n as f64).round() as usize).clamp(min_train.min(n), n);
    let mut train = shuffled[..k].to_vec();
    let mut rest = shuffled[k..].to_vec();
    train.sort_unstable();
    rest.sort_unstable();
    (train, rest)
}

/// Two one-class scorers and the reference sets of the integrative ratio score.
///
/// For a test index `j` the score is `−û0,j(x) / û1(x)` where
///
/// * `û0,j(x) = (#{i ∈ N ∪ {j} : s0(x) ≤ s0(X_i)}) / (|N| + 1)`
/// * `û1(x)  = (#{i ∈ T : s1(x) ≤ s1(X_i)} + 1) / (|T| + 1)`
///
/// with `N` the null reference set and `T` the non-null reference set. The
/// ratio itself is small for points that look like outliers; it is negated so
/// that larger scores remain stronger evidence against the null.
pub struct IntegrativeFit {
    s0: ScoreModel,
    s1: ScoreModel,
    null_ref: Vec<f64>,
    nonnull_ref: Vec<f64>,
}

impl IntegrativeFit {
    pub fn new(s0: ScoreModel, s1: ScoreModel, null_ref_rows: &[&[f64]], nonnull_ref_rows: &[&[f64]]) -> Self {
        let mut null_ref: Vec<f64> = null_ref_rows.iter().map(|r| s0.evaluate(r)).collect();
        let mut nonnull_ref: Vec<f64> = nonnull_ref_rows.iter().map(|r| s1.evaluate(r)).collect();
        null_ref.sort_unstable_by(|a, b| a.total_cmp(b));
        nonnull_ref.sort_unstable_by(|a, b| a.total_cmp(b));
        Self { s0, s1, null_ref, nonnull_ref }
    }

    /// The enhanced construction: `s0` on `D0 ∪ Du`, `s1` on `D1,t`, `N = L0`,
    /// `T = T1`.
    pub fn enhanced(view: &DataView<'_>, t1: &[usize], learner: &OneClassLearner) -> Result<Self> {
        let p = view.problem();
        let pool = view.rows(p.null_indices().chain(p.test_indices()));
        let s0 = fit_one_class(&pool, learner)?;
        let t1_rows = view.rows(t1.iter().copied());
        let s1 = fit_one_class(&t1_rows, learner)?;
        let null_rows = view.rows(p.null_indices());
        Ok(Self::new(s0, s1, &null_rows, &t1_rows))
    }

    pub fn s0(&self) -> &ScoreModel {
        &self.s0
    }
    pub fn s1(&self) -> &ScoreModel {
        &self.s1
    }

    /// Score from precomputed `s0(x)`, `s1(x)` and `s0(X_j)`.
    pub fn score_from(&self, s0x: f64, s1x: f64, s0j: f64) -> f64 {
        let a = count_at_least(&self.null_ref, s0x) + usize::from(s0x <= s0j);
        let b = count_at_least(&self.nonnull_ref, s1x) + 1;
        let num = (a * (self.nonnull_ref.len() + 1)) as f64;
        let den = (b * (self.null_ref.len() + 1)) as f64;
        -(num / den)
    }

    /// `û0,j(x)` as a fraction, for diagnostics.
    pub fn u0(&self, x: &[f64], x_j: &[f64]) -> f64 {
        let s0x = self.s0.evaluate(x);
        let a = count_at_least(&self.null_ref, s0x) + usize::from(s0x <= self.s0.evaluate(x_j));
        a as f64 / (self.null_ref.len() + 1) as f64
    }

    /// `û1(x)` as a fraction, for diagnostics.
    pub fn u1(&self, x: &[f64]) -> f64 {
        let b = count_at_least(&self.nonnull_ref, self.s1.evaluate(x)) + 1;
        b as f64 / (self.nonnull_ref.len() + 1) as f64
    }

    /// `S^(j)` as a standalone model, given the test point `X_j`.
    pub fn model_for(self: &Arc<Self>, x_j: &[f64]) -> ScoreModel {
        let s0j = self.s0.evaluate(x_j);
        ScoreModel::new(
            IntegrativeScorer { fit: Arc::clone(self), s0j },
            SymmetryClass::CalibrationSymmetric,
            FitSpec::new("integrative", "s0 on D0∪Du, s1 on D1,t"),
        )
    }
}

/// `#{v ∈ sorted : v ≥ x}`.
pub(crate) fn count_at_least(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|v| *v < x)
}

/// `S^(j)` of an [`IntegrativeFit`].
pub struct IntegrativeScorer {
    fit: Arc<IntegrativeFit>,
    s0j: f64,
}

impl ScoreFn for IntegrativeScorer {
    fn score(&self, x: &[f64]) -> f64 {
        self.fit.score_from(self.fit.s0.evaluate(x), self.fit.s1.evaluate(x), self.s0j)
    }
}

/// Rebuilds the enhanced integrative score on any view of the data, with a
/// fixed `D1,t`.
#[derive(Debug, Clone)]
pub struct IntegrativeFactory {
    pub t1: Vec<usize>,
    pub learner: OneClassLearner,
}

impl ScoreFactory for IntegrativeFactory {
    fn build(&self, data: &DataView<'_>, j: usize) -> Result<ScoreModel> {
        let fit = Arc::new(IntegrativeFit::enhanced(data, &self.t1, &self.learner)?);
        Ok(fit.model_for(data.row(j)))
    }
}

/// The enhanced integrative score `S^(j)` for one test index.
///
/// `D1` is split by a seeded shuffle into `D1,t` (fraction `train_fraction`,
/// at least two rows) and `D1,c`; only `D1,t` enters the score.
pub fn fit_integrative(
    problem: &TestingProblem,
    j: usize,
    split_seed: u64,
    learner: &OneClassLearner,
    train_fraction: f64,
) -> Result<ScoreModel> {
    if problem.n1() < 2 {
        return Err(EcotError::Config(format!(
            "integrative scores need at least 2 non-null samples, got {}",
            problem.n1()
        )));
    }
    problem.test_position(j)?;
    let l1: Vec<usize> = problem.nonnull_indices().collect();
    let (t1, _) = split_indices(&l1, train_fraction, derive_seed(split_seed, 1), 2);
    let fit = Arc::new(IntegrativeFit::enhanced(&DataView::identity(problem), &t1, learner)?);
    Ok(fit.model_for(problem.row(j)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FeatureMatrix;

    fn problem() -> TestingProblem {
        let null = FeatureMatrix::new(vec![0.0, 0.1, -0.2, 0.3, 0.05], 1).unwrap();
        let nonnull = FeatureMatrix::new(vec![5.0, 5.5, 6.0, 4.5], 1).unwrap();
        let test = FeatureMatrix::new(vec![0.2, 9.0, -0.1], 1).unwrap();
        TestingProblem::new(null, nonnull, test).unwrap()
    }

    #[test]
    fn u1_is_bounded_away_from_zero() {
        let p = problem();
        let l1: Vec<usize> = p.nonnull_indices().collect();
        let (t1, _) = split_indices(&l1, 0.5, 9, 2);
        let fit = IntegrativeFit::enhanced(&DataView::identity(&p), &t1, &OneClassLearner::default()).unwrap();
        let t = t1.len() as f64;
        for x in [-100.0, 0.0, 5.0, 1e6] {
            let u1 = fit.u1(&[x]);
            assert!(u1 >= 1.0 / (t + 1.0) && u1 <= 1.0);
        }
    }

    #[test]
    fn extreme_null_anomaly_has_minimal_u0() {
        let p = problem();
        let l1: Vec<usize> = p.nonnull_indices().collect();
        let (t1, _) = split_indices(&l1, 0.5, 9, 2);
        let fit = IntegrativeFit::enhanced(&DataView::identity(&p), &t1, &OneClassLearner::default()).unwrap();
        // X_j = 9.0 is far from every pooled point, so s0 ranks it first
        let xj = p.row(10);
        assert_eq!(fit.u0(xj, xj), 1.0 / 6.0);
    }

    #[test]
    fn requires_two_nonnulls() {
        let null = FeatureMatrix::new(vec![0.0, 1.0], 1).unwrap();
        let nonnull = FeatureMatrix::new(vec![5.0], 1).unwrap();
        let test = FeatureMatrix::new(vec![0.5], 1).unwrap();
        let p = TestingProblem::new(null, nonnull, test).unwrap();
        assert!(matches!(
            fit_integrative(&p, 3, 1, &OneClassLearner::default(), 0.5),
            Err(EcotError::Config(_))
        ));
    }

    #[test]
    fn split_respects_minimum() {
        let idx = [10, 11];
        let (t, c) = split_indices(&idx, 0.5, 3, 2);
        assert_eq!(t, vec![10, 11]);
        assert!(c.is_empty());
        let idx: Vec<usize> = (0..10).collect();
        let (t, c) = split_indices(&idx, 0.5, 3, 1);
        assert_eq!((t.len(), c.len()), (5, 5));
    }
}
