//! Conformal p-values: the full-permutation definition and the closed rank
//! formulas it collapses to under each symmetry class.
//!
//! Comparisons are `≤` throughout, so ties count toward the p-value.

mod jackknife;
mod permutation;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};
use crate::problem::{CalibrationSet, Part, TestingProblem};
use crate::scorers::{DataView, ScoreFactory, ScoreModel, SymmetryClass};

pub use jackknife::{jackknife_pvalues, jackknife_scores, JackknifeScores, LeaveOneOutFactory};
pub use permutation::{
    lower_median, modified_pvalues_full, pvalue_full_permutation, FullPermutationScores, PermutationFamily,
    ENUMERATION_CAP,
};

/// `p_j = (1/(|C|+1)) Σ_{i∈C∪{j}} 1{S(X_j) ≤ S(X_i)}` from the scores of
/// `C ∪ {j}`; `scores[j_position]` is the test point's own score.
pub fn pvalue_reduced_calibration_symmetric(scores: &[f64], j_position: usize) -> Result<f64> {
    if scores.is_empty() {
        return Err(EcotError::Domain("score vector over C ∪ {j} is empty".into()));
    }
    let sj = *scores
        .get(j_position)
        .ok_or_else(|| EcotError::Domain(format!("position {j_position} outside a vector of {}", scores.len())))?;
    let count = scores.iter().filter(|&&s| sj <= s).count();
    Ok(count as f64 / scores.len() as f64)
}

/// `(1 + #{i ∈ C : s ≤ calib_i}) / (|C| + 1)`, with `calib` sorted ascending.
pub(crate) fn rank_pvalue(sorted_calib: &[f64], s: f64) -> f64 {
    (count_at_least(sorted_calib, s) + 1) as f64 / (sorted_calib.len() + 1) as f64
}

pub(crate) fn count_at_least(sorted: &[f64], x: f64) -> usize {
    sorted.len() - sorted.partition_point(|v| *v < x)
}

pub(crate) fn sorted(values: &[f64]) -> Vec<f64> {
    let mut v = values.to_vec();
    v.sort_unstable_by(|a, b| a.total_cmp(b));
    v
}

/// The basic conformal p-value with one shared joint-symmetric score.
pub fn pvalue_joint_symmetric(
    model: &ScoreModel,
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    j: usize,
) -> Result<f64> {
    if model.symmetry() != SymmetryClass::JointSymmetric {
        return Err(EcotError::Contract(format!(
            "joint-symmetric p-value needs a joint-symmetric score, got {:?}",
            model.symmetry()
        )));
    }
    problem.test_position(j)?;
    let sj = model.evaluate(problem.row(j));
    let count = calibration.indices().iter().filter(|&&i| sj <= model.evaluate(problem.row(i))).count() + 1;
    Ok(count as f64 / (calibration.len() + 1) as f64)
}

/// Which modified p-value formula conditional calibration uses.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModifiedForm {
    /// `p̃_ℓ = (#{i ∈ C : S(X_ℓ) ≤ S(X_i)} + 1{S(X_ℓ) ≤ S(X_j)}) / (|C| + 1)`.
    #[default]
    Standard,
    /// The same count plus one, over `|C| + 2`.
    PlusOne,
}

/// Modified p-values `p̃^(j)_ℓ` over `U` from the scores of one function
/// `S^(j)`: `test_scores` over `U` (in test order) and `calib_scores` over `C`.
/// The entry at `j_position` is 0.
pub fn modified_pvalues_reduced(
    test_scores: &[f64],
    calib_scores: &[f64],
    j_position: usize,
    form: ModifiedForm,
) -> Result<Vec<f64>> {
    let sj = *test_scores
        .get(j_position)
        .ok_or_else(|| EcotError::Domain(format!("position {j_position} outside {} test scores", test_scores.len())))?;
    Ok(modified_from_sorted(&sorted(calib_scores), test_scores, j_position, sj, form))
}

pub(crate) fn modified_from_sorted(
    sorted_calib: &[f64],
    test_scores: &[f64],
    j_position: usize,
    sj: f64,
    form: ModifiedForm,
) -> Vec<f64> {
    let (extra, den) = match form {
        ModifiedForm::Standard => (0, sorted_calib.len() + 1),
        ModifiedForm::PlusOne => (1, sorted_calib.len() + 2),
    };
    test_scores
        .iter()
        .enumerate()
        .map(|(t, &s)| {
            if t == j_position {
                0.0
            } else {
                (count_at_least(sorted_calib, s) + usize::from(s <= sj) + extra) as f64 / den as f64
            }
        })
        .collect()
}

/// Scores of `S^(j)` on the calibration set and on the test set.
#[derive(Debug, Clone, PartialEq)]
pub struct JScores {
    /// `S^(j)(X_i)` for `i ∈ C`, in calibration order.
    pub calib: Vec<f64>,
    /// `S^(j)(X_ℓ)` for `ℓ ∈ U`, in test order.
    pub test: Vec<f64>,
}

/// Supplies the scores of `S^(j)` for each test position under a
/// calibration-symmetric (or stronger) construction.
pub trait ScoreProvider: Sync {
    fn m(&self) -> usize;
    fn calibration_size(&self) -> usize;
    fn scores(&self, j_position: usize) -> Result<Arc<JScores>>;
}

/// One score function shared by every test point.
#[derive(Debug, Clone)]
pub struct SharedScores {
    scores: Arc<JScores>,
}

impl SharedScores {
    pub fn new(calib: Vec<f64>, test: Vec<f64>) -> Self {
        Self { scores: Arc::new(JScores { calib, test }) }
    }

    /// Evaluates a joint-symmetric model on `C` and `U`.
    pub fn from_model(model: &ScoreModel, problem: &TestingProblem, calibration: &CalibrationSet) -> Result<Self> {
        if model.symmetry() != SymmetryClass::JointSymmetric {
            return Err(EcotError::Contract(format!(
                "a shared score must be joint-symmetric, got {:?}",
                model.symmetry()
            )));
        }
        let calib = calibration.indices().iter().map(|&i| model.evaluate(problem.row(i))).collect();
        let test = problem.test_indices().map(|l| model.evaluate(problem.row(l))).collect();
        Ok(Self::new(calib, test))
    }

    pub fn get(&self) -> &JScores {
        &self.scores
    }
}

impl ScoreProvider for SharedScores {
    fn m(&self) -> usize {
        self.scores.test.len()
    }
    fn calibration_size(&self) -> usize {
        self.scores.calib.len()
    }
    fn scores(&self, _j_position: usize) -> Result<Arc<JScores>> {
        Ok(Arc::clone(&self.scores))
    }
}

/// Builds `S^(j)` from a factory for every test point, on the unpermuted data.
pub struct FactoryProvider<'a> {
    problem: &'a TestingProblem,
    calibration: &'a CalibrationSet,
    factory: &'a dyn ScoreFactory,
}

impl<'a> FactoryProvider<'a> {
    pub fn new(problem: &'a TestingProblem, calibration: &'a CalibrationSet, factory: &'a dyn ScoreFactory) -> Self {
        Self { problem, calibration, factory }
    }
}

impl ScoreProvider for FactoryProvider<'_> {
    fn m(&self) -> usize {
        self.problem.m()
    }
    fn calibration_size(&self) -> usize {
        self.calibration.len()
    }
    fn scores(&self, j_position: usize) -> Result<Arc<JScores>> {
        let j = self.problem.n() + j_position;
        let model = self.factory.build(&DataView::identity(self.problem), j)?;
        if !model.symmetry().is_calibration_symmetric() {
            return Err(EcotError::Contract(format!(
                "reduced p-values need a calibration-symmetric score, got {:?}",
                model.symmetry()
            )));
        }
        let p = self.problem;
        Ok(Arc::new(JScores {
            calib: self.calibration.indices().iter().map(|&i| model.evaluate(p.row(i))).collect(),
            test: p.test_indices().map(|l| model.evaluate(p.row(l))).collect(),
        }))
    }
}

/// Reduced p-values `p_j` for every test position.
pub fn reduced_pvalues(provider: &dyn ScoreProvider) -> Result<Vec<f64>> {
    (0..provider.m())
        .map(|t| {
            let s = provider.scores(t)?;
            Ok(rank_pvalue(&sorted(&s.calib), s.test[t]))
        })
        .collect()
}

/// Pseudo-label p-value with a label-monotone score:
///
/// `p_j = (1/(|C01|+1)) Σ_{i∈C01∪{j}} 1{S(X_j, 0) ≤ S(X_i, Ỹ_i)}`
///
/// where `Ỹ_i` is the observed label on `C01 ⊆ L0 ∪ L1`.
pub fn pvalue_pseudolabel(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    j: usize,
    model: &ScoreModel,
) -> Result<f64> {
    if model.symmetry() != SymmetryClass::LabelMonotone {
        return Err(EcotError::Contract(format!(
            "pseudo-label p-values need a label-monotone score, got {:?}",
            model.symmetry()
        )));
    }
    problem.test_position(j)?;
    let sj = model.evaluate_labeled(problem.row(j), 0)?;
    let mut count = 1;
    for &i in calibration.indices() {
        let label = match problem.part(i) {
            Part::Null => 0,
            Part::NonNull => 1,
            Part::Test => return Err(EcotError::Domain(format!("calibration index {i} is a test index"))),
        };
        if sj <= model.evaluate_labeled(problem.row(i), label)? {
            count += 1;
        }
    }
    Ok(count as f64 / (calibration.len() + 1) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::FeatureMatrix;
    use crate::scorers::{LabelMonotone, LabelRule};

    #[test]
    fn reduced_examples() {
        assert_eq!(pvalue_reduced_calibration_symmetric(&[0.1, 0.5, 0.9, 0.5], 3).unwrap(), 0.75);
        assert_eq!(pvalue_reduced_calibration_symmetric(&[0.1, 0.5, 2.0], 2).unwrap(), 1.0 / 3.0);
        assert_eq!(pvalue_reduced_calibration_symmetric(&[1.0; 5], 0).unwrap(), 1.0);
        assert!(pvalue_reduced_calibration_symmetric(&[], 0).is_err());
    }

    #[test]
    fn modified_identity_under_shared_scores() {
        let calib = [0.3, 0.9, 0.1, 0.6];
        let test = [0.5, 0.2, 0.95, 0.6];
        let sc = sorted(&calib);
        let p: Vec<f64> = test.iter().map(|&s| rank_pvalue(&sc, s)).collect();
        for j in 0..test.len() {
            let mp = modified_pvalues_reduced(&test, &calib, j, ModifiedForm::Standard).unwrap();
            assert_eq!(mp[j], 0.0);
            for l in (0..test.len()).filter(|&l| l != j) {
                let shift = f64::from(u8::from(test[j] < test[l])) / 5.0;
                assert!((mp[l] - (p[l] - shift)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn plus_one_form() {
        let mp = modified_pvalues_reduced(&[0.5, 0.2], &[0.3, 0.9], 0, ModifiedForm::PlusOne).unwrap();
        // S(X_1) = 0.2: two calibration scores above, 0.2 ≤ 0.5, plus one → 4/4
        assert_eq!(mp, vec![0.0, 1.0]);
    }

    fn problem() -> TestingProblem {
        TestingProblem::new(
            FeatureMatrix::new(vec![0.0, 1.0, 2.0], 1).unwrap(),
            FeatureMatrix::new(vec![5.0, 6.0], 1).unwrap(),
            FeatureMatrix::new(vec![1.5, 7.0], 1).unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn joint_symmetric_requires_tag() {
        let p = problem();
        let c = CalibrationSet::all_null(&p);
        let fixed = ScoreModel::fixed(|x: &[f64]| x[0], "id");
        assert_eq!(pvalue_joint_symmetric(&fixed, &p, &c, 5).unwrap(), 2.0 / 4.0);
        assert_eq!(pvalue_joint_symmetric(&fixed, &p, &c, 6).unwrap(), 1.0 / 4.0);
        let general = fixed.tagged(SymmetryClass::General, "?");
        assert!(matches!(pvalue_joint_symmetric(&general, &p, &c, 5), Err(EcotError::Contract(_))));
    }

    #[test]
    fn pseudolabel_hand_instance() {
        let p = problem();
        let base = ScoreModel::fixed(|x: &[f64]| x[0], "id");
        let c01 = CalibrationSet::labeled(&p, vec![0, 1, 3, 4]).unwrap();
        let neg = LabelMonotone::new(base.clone(), LabelRule::NegInfinity).unwrap().into_model();
        // S(1.5, 0) = 1.5; nulls 0, 1 below; non-nulls at −∞ → only the self term
        assert_eq!(pvalue_pseudolabel(&p, &c01, 5, &neg).unwrap(), 1.0 / 5.0);
        let off = LabelMonotone::new(base, LabelRule::Offset(4.0)).unwrap().into_model();
        // non-nulls score 1.0 and 2.0 → 2.0 counts
        assert_eq!(pvalue_pseudolabel(&p, &c01, 5, &off).unwrap(), 2.0 / 5.0);
        let plain = ScoreModel::fixed(|x: &[f64]| x[0], "id");
        assert!(pvalue_pseudolabel(&p, &c01, 5, &plain).is_err());
    }

    #[test]
    fn pseudolabel_on_nulls_matches_reduced() {
        let p = problem();
        let base = ScoreModel::fixed(|x: &[f64]| -(x[0] - 1.2).abs(), "f");
        let m = LabelMonotone::new(base.clone(), LabelRule::NegInfinity).unwrap().into_model();
        let c = CalibrationSet::all_null(&p);
        for j in p.test_indices() {
            let mut scores: Vec<f64> = c.indices().iter().map(|&i| base.evaluate(p.row(i))).collect();
            scores.push(base.evaluate(p.row(j)));
            assert_eq!(
                pvalue_pseudolabel(&p, &c, j, &m).unwrap(),
                pvalue_reduced_calibration_symmetric(&scores, 3).unwrap()
            );
        }
    }
}
