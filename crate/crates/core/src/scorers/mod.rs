//! Score functions with a declared symmetry class.
//!
//! A score is a non-conformity measure: larger values are stronger evidence
//! against the null. Built-in learners stand in for tree ensembles and are
//! deterministic functions of the *multiset* of training rows: every fit sorts
//! its rows into a canonical lexicographic order before touching them, so
//! refitting on shuffled rows reproduces the model bit for bit. That property
//! is what the symmetry tags promise.

mod binary;
mod factory;
mod integrative;
mod localized;
mod one_class;
mod reference;

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};

pub use binary::{LdaModel, LogisticModel};
pub use factory::{DataView, ScoreFactory};
pub use integrative::{fit_integrative, split_indices, IntegrativeFactory, IntegrativeFit, IntegrativeScorer};
pub use localized::{fit_localized, Kernel, LocalizedFactory, LocalizedScorer};
pub use one_class::{KdeScorer, KnnScorer};
pub use reference::{oracle_gaussian_ratio, GaussianRatio, LabelMonotone, LabelRule};

/// How a score function was constructed relative to the data it is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SymmetryClass {
    /// No symmetry; only the full-permutation p-value is valid.
    General,
    /// `S^(j)` is symmetric in `{X_i : i ∈ C ∪ {j}}`.
    CalibrationSymmetric,
    /// One shared `S`, symmetric in `{X_i : i ∈ C ∪ H0}`.
    JointSymmetric,
    /// `S^(j)` is symmetric in `{X_i : i ∈ C ∪ U \ {j}}` (leave-one-out).
    JackknifeType,
    /// `S(x, y)` with `S(x, 0) ≥ S(x, 1)`.
    LabelMonotone,
}

impl SymmetryClass {
    /// Joint symmetry implies calibration symmetry.
    pub fn is_calibration_symmetric(self) -> bool {
        matches!(self, Self::CalibrationSymmetric | Self::JointSymmetric)
    }
}

/// A fitted score function.
pub trait ScoreFn: Send + Sync {
    fn score(&self, x: &[f64]) -> f64;

    /// Label-aware score `S(x, y)`; `None` for scorers without a label argument.
    fn score_labeled(&self, _x: &[f64], _label: u8) -> Option<f64> {
        None
    }

    /// Weight vector in feature space, for linear models.
    fn linear_weights(&self) -> Option<&[f64]> {
        None
    }
}

/// Adapter turning a closure into a [`ScoreFn`].
pub struct FnScorer<F>(pub F);

impl<F> ScoreFn for FnScorer<F>
where
    F: Fn(&[f64]) -> f64 + Send + Sync,
{
    fn score(&self, x: &[f64]) -> f64 {
        (self.0)(x)
    }
}

/// What a model was fitted on, for reports and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSpec {
    pub learner: String,
    pub fitted_on: String,
    /// Set when the learner fell back to a constant score.
    pub degenerate: bool,
}

impl FitSpec {
    pub fn new(learner: impl Into<String>, fitted_on: impl Into<String>) -> Self {
        Self { learner: learner.into(), fitted_on: fitted_on.into(), degenerate: false }
    }
}

/// A fitted score function together with its symmetry declaration.
#[derive(Clone)]
pub struct ScoreModel {
    func: Arc<dyn ScoreFn>,
    symmetry: SymmetryClass,
    fit: FitSpec,
}

impl fmt::Debug for ScoreModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScoreModel")
            .field("symmetry", &self.symmetry)
            .field("fit", &self.fit)
            .finish()
    }
}

impl ScoreModel {
    pub fn new(func: impl ScoreFn + 'static, symmetry: SymmetryClass, fit: FitSpec) -> Self {
        Self { func: Arc::new(func), symmetry, fit }
    }

    pub fn from_arc(func: Arc<dyn ScoreFn>, symmetry: SymmetryClass, fit: FitSpec) -> Self {
        Self { func, symmetry, fit }
    }

    /// A data-independent score function, joint-symmetric for any calibration set.
    pub fn fixed<F>(f: F, name: &str) -> Self
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        Self::new(FnScorer(f), SymmetryClass::JointSymmetric, FitSpec::new(name, "nothing"))
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.func.score(x)
    }

    pub fn evaluate_labeled(&self, x: &[f64], label: u8) -> Result<f64> {
        self.func.score_labeled(x, label).ok_or_else(|| {
            EcotError::Contract(format!("scorer '{}' takes no label argument", self.fit.learner))
        })
    }

    pub fn linear_weights(&self) -> Option<&[f64]> {
        self.func.linear_weights()
    }

    pub fn symmetry(&self) -> SymmetryClass {
        self.symmetry
    }

    pub fn fit_spec(&self) -> &FitSpec {
        &self.fit
    }

    /// Declares the symmetry class the caller's choice of fitting pool achieves.
    pub fn tagged(mut self, symmetry: SymmetryClass, fitted_on: impl Into<String>) -> Self {
        self.symmetry = symmetry;
        self.fit.fitted_on = fitted_on.into();
        self
    }
}

/// Binary classifier used as a score (log-odds of class-1 membership).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BinaryLearner {
    /// L2-regularized logistic regression, full-batch gradient descent on
    /// standardized features for a fixed number of iterations.
    Logistic {
        #[serde(default = "default_l2")]
        l2: f64,
        #[serde(default = "default_iterations")]
        iterations: usize,
    },
    /// Gaussian linear discriminant analysis with a ridge on the pooled covariance.
    Lda {
        #[serde(default = "default_ridge")]
        ridge: f64,
    },
}

fn default_l2() -> f64 {
    1e-3
}
fn default_iterations() -> usize {
    500
}
fn default_ridge() -> f64 {
    1e-3
}

impl Default for BinaryLearner {
    fn default() -> Self {
        Self::Logistic { l2: default_l2(), iterations: default_iterations() }
    }
}

/// One-class learner used as a non-conformity score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "learner", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OneClassLearner {
    /// Mean distance to the `k` nearest pool rows; default `k = ceil(sqrt(pool))`.
    Knn {
        #[serde(default)]
        k: Option<usize>,
    },
    /// Negative Gaussian kernel density; default bandwidth = median pairwise distance.
    Kde {
        #[serde(default)]
        bandwidth: Option<f64>,
    },
}

impl Default for OneClassLearner {
    fn default() -> Self {
        Self::Knn { k: None }
    }
}

/// Fits a binary classifier separating `class1` from `class0`.
///
/// The returned model is tagged [`SymmetryClass::General`]; callers that pool
/// exchangeable data into one class declare the resulting symmetry with
/// [`ScoreModel::tagged`].
pub fn fit_binary(class0: &[&[f64]], class1: &[&[f64]], learner: &BinaryLearner) -> Result<ScoreModel> {
    if class0.is_empty() || class1.is_empty() {
        return Err(EcotError::Input("both classes need at least one row".into()));
    }
    let d = class0[0].len();
    if class0.iter().chain(class1).any(|r| r.len() != d) {
        return Err(EcotError::Input("classes have different column counts".into()));
    }
    let first = class0[0];
    if class0.iter().chain(class1).all(|r| *r == first) {
        let mut fit = FitSpec::new(learner_name(learner), "class1 vs class0");
        fit.degenerate = true;
        return Ok(ScoreModel::new(FnScorer(|_: &[f64]| 0.0), SymmetryClass::General, fit));
    }
    let c0 = canonical_rows(class0);
    let c1 = canonical_rows(class1);
    let fit = FitSpec::new(learner_name(learner), "class1 vs class0");
    Ok(match *learner {
        BinaryLearner::Logistic { l2, iterations } => {
            if !(l2 >= 0.0) {
                return Err(EcotError::Parameter(format!("l2 strength {l2} must be non-negative")));
            }
            ScoreModel::new(LogisticModel::fit(&c0, &c1, l2, iterations), SymmetryClass::General, fit)
        }
        BinaryLearner::Lda { ridge } => {
            if !(ridge > 0.0) {
                return Err(EcotError::Parameter(format!("ridge {ridge} must be positive")));
            }
            ScoreModel::new(LdaModel::fit(&c0, &c1, ridge)?, SymmetryClass::General, fit)
        }
    })
}

fn learner_name(learner: &BinaryLearner) -> &'static str {
    match learner {
        BinaryLearner::Logistic { .. } => "logistic",
        BinaryLearner::Lda { .. } => "lda",
    }
}

/// Fits a one-class non-conformity score on `pool`.
pub fn fit_one_class(pool: &[&[f64]], learner: &OneClassLearner) -> Result<ScoreModel> {
    if pool.len() < 2 {
        return Err(EcotError::Parameter(format!(
            "one-class pool needs at least 2 rows, got {}",
            pool.len()
        )));
    }
    let d = pool[0].len();
    if pool.iter().any(|r| r.len() != d) {
        return Err(EcotError::Input("pool rows have different column counts".into()));
    }
    let rows = canonical_rows(pool);
    Ok(match *learner {
        OneClassLearner::Knn { k } => {
            let k = match k {
                Some(k) if k == 0 || k >= rows.len() => {
                    return Err(EcotError::Parameter(format!(
                        "k = {k} must lie in 1..{} for a pool of {} rows",
                        rows.len(),
                        rows.len()
                    )))
                }
                Some(k) => k,
                None => default_k(rows.len()),
            };
            ScoreModel::new(KnnScorer::new(&rows, k), SymmetryClass::General, FitSpec::new("knn", "pool"))
        }
        OneClassLearner::Kde { bandwidth } => {
            let h = match bandwidth {
                Some(h) if !(h > 0.0) => {
                    return Err(EcotError::Parameter(format!("bandwidth {h} must be positive")))
                }
                Some(h) => h,
                None => median_pairwise_distance(&rows).max(f64::MIN_POSITIVE),
            };
            ScoreModel::new(KdeScorer::new(&rows, h), SymmetryClass::General, FitSpec::new("kde", "pool"))
        }
    })
}

/// `ceil(sqrt(n))`, kept strictly below the pool size.
pub fn default_k(pool_size: usize) -> usize {
    let k = (pool_size as f64).sqrt().ceil() as usize;
    k.clamp(1, pool_size.saturating_sub(1).max(1))
}

/// Rows sorted lexicographically under `f64::total_cmp`.
pub fn canonical_rows<'a>(rows: &[&'a [f64]]) -> Vec<&'a [f64]> {
    let mut out = rows.to_vec();
    out.sort_by(|a, b| lex_cmp(a, b));
    out
}

pub(crate) fn lex_cmp(a: &[f64], b: &[f64]) -> Ordering {
    for (x, y) in a.iter().zip(b) {
        match x.total_cmp(y) {
            Ordering::Equal => continue,
            o => return o,
        }
    }
    a.len().cmp(&b.len())
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Lower median of all pairwise Euclidean distances.
pub fn median_pairwise_distance(rows: &[&[f64]]) -> f64 {
    let mut d = Vec::with_capacity(rows.len() * rows.len().saturating_sub(1) / 2);
    for i in 0..rows.len() {
        for j in i + 1..rows.len() {
            d.push(sq_dist(rows[i], rows[j]).sqrt());
        }
    }
    if d.is_empty() {
        return 0.0;
    }
    let mid = (d.len() - 1) / 2;
    let (_, v, _) = d.select_nth_unstable_by(mid, |a, b| a.total_cmp(b));
    *v
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;
    use rand_distr::StandardNormal;

    fn gaussian_rows(rng: &mut ChaCha20Rng, n: usize, d: usize, shift: f64) -> Vec<Vec<f64>> {
        (0..n)
            .map(|_| (0..d).map(|_| rng.sample::<f64, _>(StandardNormal) + shift).collect())
            .collect()
    }

    fn refs(rows: &[Vec<f64>]) -> Vec<&[f64]> {
        rows.iter().map(|r| r.as_slice()).collect()
    }

    #[test]
    fn logistic_slope_is_positive_for_shifted_class1() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let c0 = gaussian_rows(&mut rng, 1000, 1, 0.0);
        let c1 = gaussian_rows(&mut rng, 1000, 1, 2.0);
        let m = fit_binary(&refs(&c0), &refs(&c1), &BinaryLearner::default()).unwrap();
        assert!(m.linear_weights().unwrap()[0] > 0.0);
        assert!(m.evaluate(&[3.0]) > m.evaluate(&[-1.0]));
    }

    #[test]
    fn identical_classes_give_flat_scores() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let c = gaussian_rows(&mut rng, 200, 2, 0.0);
        for learner in [BinaryLearner::default(), BinaryLearner::Lda { ridge: 1e-3 }] {
            let m = fit_binary(&refs(&c), &refs(&c), &learner).unwrap();
            let probe: Vec<f64> = (-10..=10)
                .flat_map(|a| (-10..=10).map(move |b| (a as f64 / 3.0, b as f64 / 3.0)))
                .map(|(a, b)| m.evaluate(&[a, b]))
                .collect();
            let spread = probe.iter().cloned().fold(f64::MIN, f64::max)
                - probe.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 0.1, "{learner:?} spread {spread}");
        }
    }

    #[test]
    fn all_rows_identical_falls_back_to_constant() {
        let row = vec![1.0, 2.0];
        let rows = vec![row.as_slice(); 4];
        let m = fit_binary(&rows, &rows[..2], &BinaryLearner::default()).unwrap();
        assert!(m.fit_spec().degenerate);
        assert_eq!(m.evaluate(&[5.0, 5.0]), m.evaluate(&[-5.0, 0.0]));
    }

    #[test]
    fn lda_recovers_mean_direction() {
        let d = 50;
        let amp = (50f64).ln().sqrt();
        let mu: Vec<f64> = (0..d).map(|i| if i < 5 { amp } else { 0.0 }).collect();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let c0 = gaussian_rows(&mut rng, 1000, d, 0.0);
        let c1: Vec<Vec<f64>> = gaussian_rows(&mut rng, 1000, d, 0.0)
            .into_iter()
            .map(|r| r.iter().zip(&mu).map(|(x, m)| x + m).collect())
            .collect();
        let m = fit_binary(&refs(&c0), &refs(&c1), &BinaryLearner::Lda { ridge: 1e-3 }).unwrap();
        let w = m.linear_weights().unwrap();
        let corr = correlation(w, &mu);
        assert!(corr >= 0.5, "correlation {corr}");
    }

    fn correlation(a: &[f64], b: &[f64]) -> f64 {
        let n = a.len() as f64;
        let ma = a.iter().sum::<f64>() / n;
        let mb = b.iter().sum::<f64>() / n;
        let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
        let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
        let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
        cov / (va * vb).sqrt()
    }

    #[test]
    fn refits_on_shuffled_rows_are_bit_identical() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let c0 = gaussian_rows(&mut rng, 60, 3, 0.0);
        let c1 = gaussian_rows(&mut rng, 20, 3, 1.0);
        let probes = gaussian_rows(&mut rng, 30, 3, 0.5);
        let learners_b = [BinaryLearner::default(), BinaryLearner::Lda { ridge: 1e-3 }];
        let learners_o = [OneClassLearner::Knn { k: None }, OneClassLearner::Kde { bandwidth: None }];
        let mut s0 = refs(&c0);
        let mut s1 = refs(&c1);
        let base_b: Vec<ScoreModel> =
            learners_b.iter().map(|l| fit_binary(&s0, &s1, l).unwrap()).collect();
        let base_o: Vec<ScoreModel> =
            learners_o.iter().map(|l| fit_one_class(&s0, l).unwrap()).collect();
        for _ in 0..3 {
            s0.shuffle(&mut rng);
            s1.shuffle(&mut rng);
            for (l, b) in learners_b.iter().zip(&base_b) {
                let m = fit_binary(&s0, &s1, l).unwrap();
                for p in &probes {
                    assert_eq!(m.evaluate(p).to_bits(), b.evaluate(p).to_bits());
                }
            }
            for (l, b) in learners_o.iter().zip(&base_o) {
                let m = fit_one_class(&s0, l).unwrap();
                for p in &probes {
                    assert_eq!(m.evaluate(p).to_bits(), b.evaluate(p).to_bits());
                }
            }
        }
    }

    #[test]
    fn knn_examples() {
        let pool = [[0.0], [0.0], [0.0]];
        let pool: Vec<&[f64]> = pool.iter().map(|r| r.as_slice()).collect();
        let m = fit_one_class(&pool, &OneClassLearner::Knn { k: Some(1) }).unwrap();
        assert_eq!(m.evaluate(&[5.0]), 5.0);
        assert_eq!(m.evaluate(&[0.0]), 0.0);
        assert!(matches!(
            fit_one_class(&pool, &OneClassLearner::Knn { k: Some(3) }),
            Err(EcotError::Parameter(_))
        ));
        assert!(fit_one_class(&pool[..1], &OneClassLearner::default()).is_err());
    }

    #[test]
    fn default_k_stays_below_pool() {
        assert_eq!(default_k(2), 1);
        assert_eq!(default_k(9), 3);
        assert_eq!(default_k(10), 4);
        assert_eq!(default_k(360), 19);
    }

    #[test]
    fn learner_config_rejects_unknown_keys() {
        let ok: BinaryLearner = serde_json::from_str(r#"{"learner":"logistic","l2":0.01}"#).unwrap();
        assert_eq!(ok, BinaryLearner::Logistic { l2: 0.01, iterations: 500 });
        assert!(serde_json::from_str::<BinaryLearner>(r#"{"learner":"logistic","foo":1}"#).is_err());
        let oc: OneClassLearner = serde_json::from_str(r#"{"learner":"knn"}"#).unwrap();
        assert_eq!(oc, OneClassLearner::Knn { k: None });
    }
}
