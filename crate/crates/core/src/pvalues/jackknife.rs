use rayon::prelude::*;

use super::{rank_pvalue, sorted, SharedScores};
use crate::error::{EcotError, Result};
use crate::problem::{CalibrationSet, PValueVector, Reduction, TestingProblem};
use crate::scorers::ScoreModel;

/// Fits `S^(k)` on the pool `{X_i : i ∈ C ∪ U \ {k}}`.
///
/// The fit must depend on the pool as a multiset only; [`jackknife_scores`]
/// probes this by refitting on the reversed pool.
pub trait LeaveOneOutFactory: Sync {
    fn fit(&self, pool: &[&[f64]]) -> Result<ScoreModel>;
}

impl<F> LeaveOneOutFactory for F
where
    F: Fn(&[&[f64]]) -> Result<ScoreModel> + Sync,
{
    fn fit(&self, pool: &[&[f64]]) -> Result<ScoreModel> {
        self(pool)
    }
}

/// Leave-one-out scores `T_k = S^(k)(X_k)` for `k ∈ C` and `k ∈ U`.
#[derive(Debug, Clone, PartialEq)]
pub struct JackknifeScores {
    pub calib: Vec<f64>,
    pub test: Vec<f64>,
}

impl JackknifeScores {
    /// Shared-score view: conditional calibration over these scores uses
    /// `p̃^(j)_ℓ = (#{i ∈ C : T_ℓ ≤ T_i} + 1{T_ℓ ≤ T_j}) / (|C|+1)`.
    pub fn provider(&self) -> SharedScores {
        SharedScores::new(self.calib.clone(), self.test.clone())
    }
}

/// Computes `T_k` for every `k ∈ C ∪ U` (`|C| + m` fits), refitting each on
/// the reversed pool to check order invariance.
pub fn jackknife_scores(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    factory: &dyn LeaveOneOutFactory,
) -> Result<JackknifeScores> {
    let members: Vec<usize> = calibration.indices().iter().copied().chain(problem.test_indices()).collect();
    let t: Vec<f64> = members
        .par_iter()
        .map(|&k| leave_one_out_score(problem, &members, k, factory))
        .collect::<Result<_>>()?;
    let (calib, test) = t.split_at(calibration.len());
    Ok(JackknifeScores { calib: calib.to_vec(), test: test.to_vec() })
}

pub(crate) fn leave_one_out_score(
    problem: &TestingProblem,
    members: &[usize],
    k: usize,
    factory: &dyn LeaveOneOutFactory,
) -> Result<f64> {
    let mut pool: Vec<&[f64]> = members.iter().filter(|&&i| i != k).map(|&i| problem.row(i)).collect();
    let x = problem.row(k);
    let forward = factory.fit(&pool)?.evaluate(x);
    pool.reverse();
    let backward = factory.fit(&pool)?.evaluate(x);
    if forward.to_bits() != backward.to_bits() {
        return Err(EcotError::Contract(format!(
            "leave-one-out score for index {k} depends on pool order ({forward} vs {backward})"
        )));
    }
    Ok(forward)
}

/// `p_j = (1 + #{i ∈ C : T_j ≤ T_i}) / (|C| + 1)` for every test point.
pub fn jackknife_pvalues(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    factory: &dyn LeaveOneOutFactory,
) -> Result<PValueVector> {
    let scores = jackknife_scores(problem, calibration, factory)?;
    let sc = sorted(&scores.calib);
    Ok(PValueVector {
        values: scores.test.iter().map(|&s| rank_pvalue(&sc, s)).collect(),
        reduction: Reduction::Jackknife,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FeatureMatrix;
    use crate::scorers::{fit_one_class, OneClassLearner};

    fn problem() -> TestingProblem {
        TestingProblem::new(
            FeatureMatrix::new(vec![0.0, 0.4, -0.3], 1).unwrap(),
            FeatureMatrix::empty(1),
            FeatureMatrix::new(vec![0.1, 3.0], 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn knn_swap_formula_by_hand() {
        let p = problem();
        let c = CalibrationSet::all_null(&p);
        let knn = |pool: &[&[f64]]| fit_one_class(pool, &OneClassLearner::Knn { k: Some(1) });
        let s = jackknife_scores(&p, &c, &knn).unwrap();
        // nearest neighbour distances within {0, 0.4, -0.3, 0.1, 3.0}
        let expect_c = [0.1, 0.3, 0.3];
        let expect_t = [0.1, 2.6];
        for (a, b) in s.calib.iter().zip(expect_c).chain(s.test.iter().zip(expect_t)) {
            assert!((a - b).abs() < 1e-12, "{a} vs {b}");
        }
        let pv = jackknife_pvalues(&p, &c, &knn).unwrap();
        assert_eq!(pv.values, vec![1.0, 0.25]);
    }

    #[test]
    fn pool_independent_factory_is_joint_symmetric_pvalue() {
        let p = problem();
        let c = CalibrationSet::all_null(&p);
        let fixed = |_: &[&[f64]]| Ok(ScoreModel::fixed(|x: &[f64]| x[0].abs(), "abs"));
        let pv = jackknife_pvalues(&p, &c, &fixed).unwrap();
        let m = ScoreModel::fixed(|x: &[f64]| x[0].abs(), "abs");
        for (t, j) in p.test_indices().enumerate() {
            assert_eq!(pv.values[t], crate::pvalues::pvalue_joint_symmetric(&m, &p, &c, j).unwrap());
        }
    }

    #[test]
    fn order_dependent_factory_is_rejected() {
        let p = problem();
        let c = CalibrationSet::all_null(&p);
        let first_row = |pool: &[&[f64]]| {
            let a = pool[0][0];
            Ok(ScoreModel::fixed(move |x: &[f64]| (x[0] - a).abs(), "first"))
        };
        assert!(matches!(jackknife_pvalues(&p, &c, &first_row), Err(EcotError::Contract(_))));
    }
}
