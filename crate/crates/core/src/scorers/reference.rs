use serde::{Deserialize, Serialize};

use super::{FitSpec, ScoreFn, ScoreModel, SymmetryClass};
use crate::error::{EcotError, Result};

/// Closed-form density-ratio score for `N(0, I)` nulls against `N(μ, I)`
/// non-nulls with null proportion `π`:
///
/// `r(x) = (1−π) f1(x) / ((1−π) f0(x) + π f1(x)) = (1−π) / ((1−π) e^{−t} + π)`
///
/// with `t = μᵀx − ‖μ‖²/2` the log likelihood ratio. Used only as the optimal
/// reference score in tests.
#[derive(Debug, Clone)]
pub struct GaussianRatio {
    mu: Vec<f64>,
    half_norm_sq: f64,
    pi: f64,
}

impl GaussianRatio {
    pub fn new(mu: Vec<f64>, pi: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&pi) {
            return Err(EcotError::Parameter(format!(
                "null proportion {pi} must lie in [0, 1); π = 1 leaves no non-null mass"
            )));
        }
        let half_norm_sq = mu.iter().map(|m| m * m).sum::<f64>() / 2.0;
        Ok(Self { mu, half_norm_sq, pi })
    }

    pub fn log_likelihood_ratio(&self, x: &[f64]) -> f64 {
        x.iter().zip(&self.mu).map(|(x, m)| x * m).sum::<f64>() - self.half_norm_sq
    }
}

impl ScoreFn for GaussianRatio {
    fn score(&self, x: &[f64]) -> f64 {
        let t = self.log_likelihood_ratio(x);
        (1.0 - self.pi) / ((1.0 - self.pi) * (-t).exp() + self.pi)
    }
}

/// The oracle density-ratio score as a data-independent model.
pub fn oracle_gaussian_ratio(mu: Vec<f64>, pi: f64) -> Result<ScoreModel> {
    Ok(ScoreModel::new(
        GaussianRatio::new(mu, pi)?,
        SymmetryClass::JointSymmetric,
        FitSpec::new("gaussian-ratio", "nothing"),
    ))
}

/// How a label-monotone score treats label 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LabelRule {
    /// `S(x, 1) = −∞`: labeled non-nulls never count against a test point.
    NegInfinity,
    /// `S(x, 1) = S(x, 0) − c` for some `c ≥ 0`.
    Offset(f64),
}

/// Lifts a score `S(x)` to a label-aware score with `S(x, 0) = S(x)` and
/// `S(x, 0) ≥ S(x, 1)`.
#[derive(Debug, Clone)]
pub struct LabelMonotone {
    base: ScoreModel,
    rule: LabelRule,
}

impl LabelMonotone {
    pub fn new(base: ScoreModel, rule: LabelRule) -> Result<Self> {
        if let LabelRule::Offset(c) = rule {
            if !(c >= 0.0) {
                return Err(EcotError::Parameter(format!("label offset {c} must be non-negative")));
            }
        }
        Ok(Self { base, rule })
    }

    pub fn into_model(self) -> ScoreModel {
        let fit = FitSpec::new(format!("label-monotone({})", self.base.fit_spec().learner), self.base.fit_spec().fitted_on.clone());
        ScoreModel::new(self, SymmetryClass::LabelMonotone, fit)
    }
}

impl ScoreFn for LabelMonotone {
    fn score(&self, x: &[f64]) -> f64 {
        self.base.evaluate(x)
    }

    fn score_labeled(&self, x: &[f64], label: u8) -> Option<f64> {
        let s = self.base.evaluate(x);
        Some(match (label, self.rule) {
            (0, _) => s,
            (_, LabelRule::NegInfinity) => f64::NEG_INFINITY,
            (_, LabelRule::Offset(c)) => s - c,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn midpoint_is_one_half() {
        let mu = vec![2.0, -1.0, 0.5];
        let m = oracle_gaussian_ratio(mu.clone(), 0.5).unwrap();
        let mid: Vec<f64> = mu.iter().map(|m| m / 2.0).collect();
        assert!((m.evaluate(&mid) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn vanishes_far_on_the_null_side() {
        let m = oracle_gaussian_ratio(vec![1.0], 0.9).unwrap();
        assert_eq!(m.evaluate(&[-1e4]), 0.0);
        assert!(m.evaluate(&[3.0]) > m.evaluate(&[0.0]));
    }

    #[test]
    fn rejects_all_null_proportion() {
        assert!(oracle_gaussian_ratio(vec![1.0], 1.0).is_err());
    }

    #[test]
    fn label_monotone_ordering() {
        let base = ScoreModel::fixed(|x: &[f64]| x[0] * 3.0, "lin");
        for rule in [LabelRule::NegInfinity, LabelRule::Offset(0.0), LabelRule::Offset(2.5)] {
            let m = LabelMonotone::new(base.clone(), rule).unwrap().into_model();
            for x in [-3.0, 0.0, 7.0] {
                assert!(m.evaluate_labeled(&[x], 0).unwrap() >= m.evaluate_labeled(&[x], 1).unwrap());
            }
        }
        assert!(LabelMonotone::new(base, LabelRule::Offset(-1.0)).is_err());
    }
}
