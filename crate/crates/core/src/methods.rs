//! Named end-to-end procedures: ECOT-bi, ECOT-oc, ECOT-as and the
//! split-conformal baselines.
//!
//! Every method takes a [`TestingProblem`] and a [`MethodSpec`] and returns a
//! [`MethodOutput`] whose report addresses test points by global index.
//! Random splits draw from the split stream of `derive_seed(seed, 0)` (for
//! `D0`) and `derive_seed(seed, 1)` (for `D1`); pruning draws from the
//! pruning stream of `seed` itself.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};
use crate::problem::{PValueVector, Reduction, RejectionReport, TestingProblem};
use crate::procedures::{bh, bh_count, calibrate, conditional_calibration, label_assisted_null_proportion, storey_all};
use crate::pvalues::{modified_from_sorted, rank_pvalue, sorted, JScores, ModifiedForm, ScoreProvider, SharedScores};
use crate::rng::derive_seed;
use crate::scorers::{
    fit_binary, fit_one_class, split_indices, BinaryLearner, IntegrativeFit, OneClassLearner, ScoreModel,
    SymmetryClass,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodName {
    EcotBi,
    EcotOc,
    EcotAs,
    EcotAsJoint,
    CpOc,
    CpBi,
    Adadetect,
    Fullnd,
    Integ,
}

impl MethodName {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EcotBi => "ecot-bi",
            Self::EcotOc => "ecot-oc",
            Self::EcotAs => "ecot-as",
            Self::EcotAsJoint => "ecot-as-joint",
            Self::CpOc => "cp-oc",
            Self::CpBi => "cp-bi",
            Self::Adadetect => "adadetect",
            Self::Fullnd => "fullnd",
            Self::Integ => "integ",
        }
    }

    /// Minimum number of labeled non-null samples.
    pub fn min_nonnull(self) -> usize {
        match self {
            Self::EcotBi | Self::CpBi | Self::EcotAsJoint => 1,
            Self::EcotOc | Self::EcotAs | Self::Integ => 2,
            Self::CpOc | Self::Adadetect | Self::Fullnd => 0,
        }
    }

    /// Whether the method splits `D0` into training and calibration parts.
    pub fn splits_null(self) -> bool {
        matches!(self, Self::CpOc | Self::CpBi | Self::Adadetect | Self::Integ)
    }
}

impl std::fmt::Display for MethodName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Null-proportion weighting of the p-values.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NullProportion {
    #[default]
    None,
    /// Storey-type `π̂_j` from an auxiliary joint-symmetric score.
    Storey {
        #[serde(default = "half")]
        lambda: f64,
    },
    /// `π̂ = (1+|C0|)/(1+|C0|+|C1|)`, with `C1` the calibration half of `D1`.
    LabelAssisted,
}

fn half() -> f64 {
    0.5
}

/// Everything a method run needs besides the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    pub name: MethodName,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub binary: BinaryLearner,
    #[serde(default)]
    pub one_class: OneClassLearner,
    /// Training share of `D0` for split-based baselines.
    #[serde(default = "half")]
    pub null_train_fraction: f64,
    /// Training share of `D1` (`D1,t`) for integrative scores and the
    /// label-assisted estimator.
    #[serde(default = "half")]
    pub nonnull_train_fraction: f64,
    #[serde(default)]
    pub null_proportion: NullProportion,
    /// Run ECOT-bi through conditional calibration instead of plain BH.
    #[serde(default)]
    pub conditional_calibration: bool,
    /// Candidate approaches for ECOT-as / ECOT-as-joint; empty means the default set.
    #[serde(default)]
    pub candidates: Vec<MethodName>,
}

fn default_alpha() -> f64 {
    0.1
}

impl MethodSpec {
    pub fn new(name: MethodName) -> Self {
        Self {
            name,
            alpha: default_alpha(),
            seed: 0,
            binary: BinaryLearner::default(),
            one_class: OneClassLearner::default(),
            null_train_fraction: 0.5,
            nonnull_train_fraction: 0.5,
            null_proportion: NullProportion::None,
            conditional_calibration: false,
            candidates: Vec::new(),
        }
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_null_proportion(mut self, estimator: NullProportion) -> Self {
        self.null_proportion = estimator;
        self
    }

    pub fn with_candidates(mut self, candidates: Vec<MethodName>) -> Self {
        self.candidates = candidates;
        self
    }

    /// Candidate list with defaults filled in.
    pub fn resolved_candidates(&self) -> Vec<MethodName> {
        if !self.candidates.is_empty() {
            return self.candidates.clone();
        }
        match self.name {
            MethodName::EcotAsJoint => vec![MethodName::EcotBi, MethodName::Fullnd],
            _ => vec![MethodName::EcotBi, MethodName::EcotOc, MethodName::Fullnd],
        }
    }

    /// Checks the spec on its own and against the shape of `problem`.
    pub fn validate(&self, problem: &TestingProblem) -> Result<()> {
        self.validate_sizes(problem.n0(), problem.n1())
    }

    /// Size-only validation, usable before any data exists.
    pub fn validate_sizes(&self, n0: usize, n1: usize) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(EcotError::Parameter(format!("alpha = {} must lie in (0, 1)", self.alpha)));
        }
        for (what, f) in [("null", self.null_train_fraction), ("non-null", self.nonnull_train_fraction)] {
            if !(f > 0.0 && f < 1.0) {
                return Err(EcotError::Parameter(format!("{what} split ratio {f} must lie in (0, 1)")));
            }
        }
        let need = match self.name {
            MethodName::EcotAs | MethodName::EcotAsJoint => {
                let cands = self.resolved_candidates();
                for c in &cands {
                    if matches!(c, MethodName::EcotAs | MethodName::EcotAsJoint) || c.splits_null() {
                        return Err(EcotError::Config(format!("{c} cannot be an approach-selection candidate")));
                    }
                    if self.name == MethodName::EcotAsJoint && *c == MethodName::EcotOc {
                        return Err(EcotError::Config("ecot-oc scores are not joint-symmetric".into()));
                    }
                }
                cands.iter().map(|c| c.min_nonnull()).max().unwrap_or(0).max(self.name.min_nonnull())
            }
            name => name.min_nonnull(),
        };
        if n1 < need {
            return Err(EcotError::Config(format!("{} needs at least {need} non-null samples, got {n1}", self.name)));
        }
        if self.name.splits_null() && n0 < 3 {
            return Err(EcotError::Config(format!("{} needs at least 3 null samples to split, got {n0}", self.name)));
        }
        match self.null_proportion {
            NullProportion::None => {}
            NullProportion::Storey { lambda } => {
                if !(lambda > 0.0 && lambda < 1.0) {
                    return Err(EcotError::Parameter(format!("lambda = {lambda} must lie in (0, 1)")));
                }
                if !matches!(self.name, MethodName::EcotBi | MethodName::EcotOc) {
                    return Err(EcotError::Config(format!("Storey weighting is not available for {}", self.name)));
                }
            }
            NullProportion::LabelAssisted => {
                if self.name != MethodName::EcotBi {
                    return Err(EcotError::Config(format!(
                        "label-assisted weighting is only available for ecot-bi, not {}",
                        self.name
                    )));
                }
                if n1 < 2 {
                    return Err(EcotError::Config("label-assisted weighting needs at least 2 non-null samples".into()));
                }
            }
        }
        Ok(())
    }
}

/// A method's result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutput {
    pub method: MethodName,
    pub report: RejectionReport,
    pub pvalues: PValueVector,
    /// `S^(j)(X_j)` per test point (under the selected candidate for ECOT-as).
    pub scores: Vec<f64>,
    /// Number of learner fits performed.
    pub model_fits: usize,
    /// ECOT-as: selected candidate per test point; ECOT-as-joint: one entry.
    pub selected: Option<Vec<usize>>,
}

/// Runs the method named in `spec`.
pub fn run(problem: &TestingProblem, spec: &MethodSpec) -> Result<MethodOutput> {
    spec.validate(problem)?;
    match spec.name {
        MethodName::EcotBi => run_ecot_bi(problem, spec),
        MethodName::EcotOc => run_ecot_oc(problem, spec),
        MethodName::EcotAs => run_ecot_as(problem, spec),
        MethodName::EcotAsJoint => run_ecot_as_joint(problem, spec),
        _ => run_baseline(problem, spec),
    }
}

/// Scores of `S^(j)` on `C` and `U` for an integrative ratio score whose
/// null reference set is `C`.
pub struct IntegrativeProvider {
    fit: Arc<IntegrativeFit>,
    s0_calib: Vec<f64>,
    s1_calib: Vec<f64>,
    s0_test: Vec<f64>,
    s1_test: Vec<f64>,
}

impl IntegrativeProvider {
    pub fn new(fit: IntegrativeFit, problem: &TestingProblem, calibration: &[usize]) -> Self {
        let eval = |m: &ScoreModel, idx: &mut dyn Iterator<Item = usize>| -> Vec<f64> {
            idx.map(|i| m.evaluate(problem.row(i))).collect()
        };
        Self {
            s0_calib: eval(fit.s0(), &mut calibration.iter().copied()),
            s1_calib: eval(fit.s1(), &mut calibration.iter().copied()),
            s0_test: eval(fit.s0(), &mut problem.test_indices()),
            s1_test: eval(fit.s1(), &mut problem.test_indices()),
            fit: Arc::new(fit),
        }
    }

    /// `s0` on `C` and `U`, a joint-symmetric auxiliary score when `s0` was
    /// fitted on `C ∪ U`.
    pub fn s0_scores(&self) -> SharedScores {
        SharedScores::new(self.s0_calib.clone(), self.s0_test.clone())
    }
}

impl ScoreProvider for IntegrativeProvider {
    fn m(&self) -> usize {
        self.s0_test.len()
    }
    fn calibration_size(&self) -> usize {
        self.s0_calib.len()
    }
    fn scores(&self, j_position: usize) -> Result<Arc<JScores>> {
        let s0j = self.s0_test[j_position];
        let f = |s0: &[f64], s1: &[f64]| -> Vec<f64> {
            s0.iter().zip(s1).map(|(&a, &b)| self.fit.score_from(a, b, s0j)).collect()
        };
        Ok(Arc::new(JScores { calib: f(&self.s0_calib, &self.s1_calib), test: f(&self.s0_test, &self.s1_test) }))
    }
}

/// A candidate approach with calibration set `L0`.
pub struct Candidate {
    pub name: MethodName,
    pub provider: Box<dyn ScoreProvider + Send>,
    /// Shared scores when the candidate is joint-symmetric.
    pub joint: Option<SharedScores>,
    pub fits: usize,
}

fn rows<'a>(problem: &'a TestingProblem, idx: impl IntoIterator<Item = usize>) -> Vec<&'a [f64]> {
    idx.into_iter().map(|i| problem.row(i)).collect()
}

/// ECOT-bi's joint-symmetric score: `D1` against the pool `D0 ∪ Du`.
pub fn ecot_bi_model(problem: &TestingProblem, learner: &BinaryLearner) -> Result<ScoreModel> {
    let class0 = rows(problem, problem.null_indices().chain(problem.test_indices()));
    let class1 = rows(problem, problem.nonnull_indices());
    Ok(fit_binary(&class0, &class1, learner)?.tagged(SymmetryClass::JointSymmetric, "class1 = D1, class0 = D0 ∪ Du"))
}

/// FullND's joint-symmetric one-class score on `D0 ∪ Du`.
pub fn fullnd_model(problem: &TestingProblem, learner: &OneClassLearner) -> Result<ScoreModel> {
    let pool = rows(problem, problem.null_indices().chain(problem.test_indices()));
    Ok(fit_one_class(&pool, learner)?.tagged(SymmetryClass::JointSymmetric, "D0 ∪ Du"))
}

/// `D1,t` of the seeded `D1` split (at least two rows).
pub fn nonnull_split(problem: &TestingProblem, spec: &MethodSpec) -> (Vec<usize>, Vec<usize>) {
    let l1: Vec<usize> = problem.nonnull_indices().collect();
    split_indices(&l1, spec.nonnull_train_fraction, derive_seed(spec.seed, 1), 2)
}

fn null_split(problem: &TestingProblem, spec: &MethodSpec) -> (Vec<usize>, Vec<usize>) {
    let l0: Vec<usize> = problem.null_indices().collect();
    let (mut train, mut calib) = split_indices(&l0, spec.null_train_fraction, derive_seed(spec.seed, 0), 2);
    if calib.is_empty() {
        calib.push(train.pop().expect("n0 ≥ 3"));
    }
    (train, calib)
}

/// Builds one ECOT-as candidate on `C = L0`.
pub fn candidate(problem: &TestingProblem, spec: &MethodSpec, name: MethodName) -> Result<Candidate> {
    let l0: Vec<usize> = problem.null_indices().collect();
    let shared = |model: ScoreModel| -> Result<Candidate> {
        let s = SharedScores::from_model(&model, problem, &crate::problem::CalibrationSet::all_null(problem))?;
        Ok(Candidate { name, provider: Box::new(s.clone()), joint: Some(s), fits: 1 })
    };
    match name {
        MethodName::EcotBi => shared(ecot_bi_model(problem, &spec.binary)?),
        MethodName::Fullnd => shared(fullnd_model(problem, &spec.one_class)?),
        MethodName::EcotOc => {
            if problem.n1() < 2 {
                return Err(EcotError::Config(format!("ecot-oc needs at least 2 non-null samples, got {}", problem.n1())));
            }
            let (t1, _) = nonnull_split(problem, spec);
            let fit = IntegrativeFit::enhanced(&crate::scorers::DataView::identity(problem), &t1, &spec.one_class)?;
            Ok(Candidate { name, provider: Box::new(IntegrativeProvider::new(fit, problem, &l0)), joint: None, fits: 2 })
        }
        other => Err(EcotError::Config(format!("{other} is not a candidate approach"))),
    }
}

fn test_scores(provider: &dyn ScoreProvider) -> Result<Vec<f64>> {
    (0..provider.m()).map(|t| Ok(provider.scores(t)?.test[t])).collect()
}

fn pvector(values: Vec<f64>, reduction: Reduction) -> PValueVector {
    PValueVector { values, reduction }
}

/// ECOT-bi: one binary fit, `C = L0`, BH (or conditional calibration when
/// requested or when the p-values are weighted).
pub fn run_ecot_bi(problem: &TestingProblem, spec: &MethodSpec) -> Result<MethodOutput> {
    spec.validate(problem)?;
    let n = problem.n();
    if spec.null_proportion == NullProportion::LabelAssisted {
        // class1 = D1,t; class0 = D0 ∪ D1,c ∪ Du keeps the score symmetric in C0 ∪ C1 ∪ {j}
        let (t1, c1) = nonnull_split(problem, spec);
        let class0 = rows(problem, problem.null_indices().chain(c1.iter().copied()).chain(problem.test_indices()));
        let class1 = rows(problem, t1.iter().copied());
        let model = fit_binary(&class0, &class1, &spec.binary)?;
        let calib: Vec<f64> = problem.null_indices().map(|i| model.evaluate(problem.row(i))).collect();
        let test: Vec<f64> = problem.test_indices().map(|i| model.evaluate(problem.row(i))).collect();
        let pi = label_assisted_null_proportion(problem.n0(), c1.len());
        let prov = SharedScores::new(calib, test.clone());
        let weights = vec![pi; problem.m()];
        let (out, p) = conditional_calibration(&prov, spec.alpha, spec.seed, ModifiedForm::Standard, Some(&weights))?;
        return Ok(MethodOutput {
            method: spec.name,
            report: out.into_report(n, spec.seed, Some(pi)),
            pvalues: pvector(p, Reduction::JointSymmetric),
            scores: test,
            model_fits: 1,
            selected: None,
        });
    }
    let model = ecot_bi_model(problem, &spec.binary)?;
    let shared = SharedScores::from_model(&model, problem, &crate::problem::CalibrationSet::all_null(problem))?;
    let scores = shared.get().test.clone();
    let sc = sorted(&shared.get().calib);
    let p: Vec<f64> = scores.iter().map(|&s| rank_pvalue(&sc, s)).collect();
    let (report, p) = match spec.null_proportion {
        NullProportion::Storey { lambda } => {
            let pi = storey_all(&shared.get().calib, &shared.get().test, lambda)?;
            let (out, p) = conditional_calibration(&shared, spec.alpha, spec.seed, ModifiedForm::Standard, Some(&pi))?;
            let mean = pi.iter().sum::<f64>() / pi.len() as f64;
            (out.into_report(n, spec.seed, Some(mean)), p)
        }
        _ if spec.conditional_calibration => {
            let (out, p) = conditional_calibration(&shared, spec.alpha, spec.seed, ModifiedForm::Standard, None)?;
            (out.into_report(n, spec.seed, None), p)
        }
        _ => (crate::procedures::bh_report(&p, spec.alpha, n, spec.seed)?, p),
    };
    Ok(MethodOutput {
        method: spec.name,
        report,
        pvalues: pvector(p, Reduction::JointSymmetric),
        scores,
        model_fits: 1,
        selected: None,
    })
}

/// ECOT-oc: integrative ratio scores with `s0` on `D0 ∪ Du` and `s1` on
/// `D1,t`, `C = L0`, conditional calibration.
pub fn run_ecot_oc(problem: &TestingProblem, spec: &MethodSpec) -> Result<MethodOutput> {
    spec.validate(problem)?;
    let (t1, _) = nonnull_split(problem, spec);
    let fit = IntegrativeFit::enhanced(&crate::scorers::DataView::identity(problem), &t1, &spec.one_class)?;
    let l0: Vec<usize> = problem.null_indices().collect();
    let prov = IntegrativeProvider::new(fit, problem, &l0);
    let pi = match spec.null_proportion {
        NullProportion::Storey { lambda } => {
            let aux = prov.s0_scores();
            Some(storey_all(&aux.get().calib, &aux.get().test, lambda)?)
        }
        _ => None,
    };
    let (out, p) = conditional_calibration(&prov, spec.alpha, spec.seed, ModifiedForm::Standard, pi.as_deref())?;
    let mean = pi.as_ref().map(|v| v.iter().sum::<f64>() / v.len() as f64);
    Ok(MethodOutput {
        method: spec.name,
        report: out.into_report(problem.n(), spec.seed, mean),
        pvalues: pvector(p, Reduction::CalibrationSymmetric),
        scores: test_scores(&prov)?,
        model_fits: 2,
        selected: None,
    })
}

/// Adjusted adaptive approach selection over candidate score providers that
/// share one calibration set.
///
/// For every test position `j` and candidate `k`, `R_k^(j)` is the BH count of
/// the candidate's modified p-values; `k*_j` maximizes it (lowest index on
/// ties), and both `p_j` and `|R_j|` come from candidate `k*_j`.
pub fn ecot_as_select(
    providers: &[&dyn ScoreProvider],
    alpha: f64,
    seed: u64,
    n: usize,
) -> Result<(RejectionReport, Vec<f64>, Vec<f64>, Vec<usize>)> {
    use rayon::prelude::*;
    let first = providers.first().ok_or_else(|| EcotError::Config("empty candidate list".into()))?;
    let m = first.m();
    if providers.iter().any(|p| p.m() != m || p.calibration_size() != first.calibration_size()) {
        return Err(EcotError::Config("candidates must share the calibration set and test set".into()));
    }
    let per_j: Vec<(f64, usize, f64, usize)> = (0..m)
        .into_par_iter()
        .map(|t| {
            let mut best: Option<(usize, usize, f64, f64)> = None;
            for (k, prov) in providers.iter().enumerate() {
                let s = prov.scores(t)?;
                let sc = sorted(&s.calib);
                let mp = modified_from_sorted(&sc, &s.test, t, s.test[t], ModifiedForm::Standard);
                let r = bh_count(&mp, alpha);
                if best.is_none_or(|(_, br, _, _)| r > br) {
                    best = Some((k, r, rank_pvalue(&sc, s.test[t]), s.test[t]));
                }
            }
            let (k, r, p, s) = best.expect("non-empty candidates");
            Ok((p, r, s, k))
        })
        .collect::<Result<_>>()?;
    let p: Vec<f64> = per_j.iter().map(|x| x.0).collect();
    let r: Vec<usize> = per_j.iter().map(|x| x.1).collect();
    let scores: Vec<f64> = per_j.iter().map(|x| x.2).collect();
    let selected: Vec<usize> = per_j.iter().map(|x| x.3).collect();
    let report = calibrate(&p, &r, alpha, seed, None).into_report(n, seed, None);
    Ok((report, p, scores, selected))
}

/// ECOT-as with the spec's candidate approaches on `C = L0`.
pub fn run_ecot_as(problem: &TestingProblem, spec: &MethodSpec) -> Result<MethodOutput> {
    spec.validate(problem)?;
    let cands: Vec<Candidate> =
        spec.resolved_candidates().into_iter().map(|c| candidate(problem, spec, c)).collect::<Result<_>>()?;
    let provs: Vec<&dyn ScoreProvider> = cands.iter().map(|c| c.provider.as_ref() as &dyn ScoreProvider).collect();
    let (report, p, scores, selected) = ecot_as_select(&provs, spec.alpha, spec.seed, problem.n())?;
    Ok(MethodOutput {
        method: spec.name,
        report,
        pvalues: pvector(p, Reduction::CalibrationSymmetric),
        scores,
        model_fits: cands.iter().map(|c| c.fits).sum(),
        selected: Some(selected),
    })
}

/// Selection criterion for joint-symmetric candidates: the average, over
/// pooled points `i ∈ L0 ∪ U`, of the fraction of labeled non-nulls scoring at
/// least as high as `X_i`. Larger values mean non-nulls receive smaller
/// p-values.
pub fn joint_selection_criterion(model: &ScoreModel, problem: &TestingProblem) -> f64 {
    let nonnull = sorted(&problem.nonnull_indices().map(|l| model.evaluate(problem.row(l))).collect::<Vec<_>>());
    let pooled: Vec<usize> = problem.null_indices().chain(problem.test_indices()).collect();
    let total: usize = pooled
        .iter()
        .map(|&i| crate::pvalues::count_at_least(&nonnull, model.evaluate(problem.row(i))))
        .sum();
    total as f64 / (pooled.len() * nonnull.len()) as f64
}

/// ECOT-as-joint: pick the joint-symmetric candidate with the largest
/// selection criterion (lowest index on ties), then plain BH.
pub fn run_ecot_as_joint(problem: &TestingProblem, spec: &MethodSpec) -> Result<MethodOutput> {
    spec.validate(problem)?;
    let names = spec.resolved_candidates();
    let mut models = Vec::with_capacity(names.len());
    for name in &names {
        models.push(match name {
            MethodName::EcotBi => ecot_bi_model(problem, &spec.binary)?,
            MethodName::Fullnd => fullnd_model(problem, &spec.one_class)?,
            other => return Err(EcotError::Config(format!("{other} is not a joint-symmetric candidate"))),
        });
    }
    run_joint_selection(problem, &models, spec.alpha, spec.seed).map(|mut o| {
        o.method = spec.name;
        o
    })
}

/// Joint-symmetric selection over arbitrary fitted candidates.
pub fn run_joint_selection(
    problem: &TestingProblem,
    models: &[ScoreModel],
    alpha: f64,
    seed: u64,
) -> Result<MethodOutput> {
    if models.is_empty() {
        return Err(EcotError::Config("empty candidate list".into()));
    }
    if problem.n1() == 0 {
        return Err(EcotError::Config("joint selection needs labeled non-null samples".into()));
    }
    let mut best = 0;
    let mut best_m = f64::NEG_INFINITY;
    for (k, model) in models.iter().enumerate() {
        let m = joint_selection_criterion(model, problem);
        if m > best_m {
            best = k;
            best_m = m;
        }
    }
    let shared = SharedScores::from_model(&models[best], problem, &crate::problem::CalibrationSet::all_null(problem))?;
    let sc = sorted(&shared.get().calib);
    let p: Vec<f64> = shared.get().test.iter().map(|&s| rank_pvalue(&sc, s)).collect();
    Ok(MethodOutput {
        method: MethodName::EcotAsJoint,
        report: crate::procedures::bh_report(&p, alpha, problem.n(), seed)?,
        pvalues: pvector(p, Reduction::JointSymmetric),
        scores: shared.get().test.clone(),
        model_fits: models.len(),
        selected: Some(vec![best]),
    })
}

/// The unadjusted selector: run BH with each candidate's p-values and report
/// the candidate with the most rejections (lowest index on ties). It reuses
/// the data for selection and testing and does not control the FDR; it
/// exists to demonstrate that failure.
pub fn naive_selection(providers: &[&dyn ScoreProvider], alpha: f64, n: usize) -> Result<(RejectionReport, usize)> {
    let mut best: Option<(usize, Vec<usize>)> = None;
    for (k, prov) in providers.iter().enumerate() {
        let p = crate::pvalues::reduced_pvalues(*prov)?;
        let r = bh(&p, alpha);
        if best.as_ref().is_none_or(|(_, b)| r.len() > b.len()) {
            best = Some((k, r));
        }
    }
    let (k, r) = best.ok_or_else(|| EcotError::Config("empty candidate list".into()))?;
    Ok((RejectionReport::from_bh(r.into_iter().map(|t| t + n).collect(), 0), k))
}

/// Split-conformal baselines: cp-oc, cp-bi, adadetect, fullnd and integ.
pub fn run_baseline(problem: &TestingProblem, spec: &MethodSpec) -> Result<MethodOutput> {
    spec.validate(problem)?;
    let n = problem.n();
    let shared_bh = |model: ScoreModel, calib_idx: &[usize], fits: usize| -> Result<MethodOutput> {
        let calib: Vec<f64> = calib_idx.iter().map(|&i| model.evaluate(problem.row(i))).collect();
        let test: Vec<f64> = problem.test_indices().map(|i| model.evaluate(problem.row(i))).collect();
        let sc = sorted(&calib);
        let p: Vec<f64> = test.iter().map(|&s| rank_pvalue(&sc, s)).collect();
        Ok(MethodOutput {
            method: spec.name,
            report: crate::procedures::bh_report(&p, spec.alpha, n, spec.seed)?,
            pvalues: pvector(p, Reduction::JointSymmetric),
            scores: test,
            model_fits: fits,
            selected: None,
        })
    };
    match spec.name {
        MethodName::Fullnd => {
            let l0: Vec<usize> = problem.null_indices().collect();
            shared_bh(fullnd_model(problem, &spec.one_class)?, &l0, 1)
        }
        MethodName::CpOc => {
            let (train, calib) = null_split(problem, spec);
            shared_bh(fit_one_class(&rows(problem, train), &spec.one_class)?, &calib, 1)
        }
        MethodName::CpBi => {
            let (train, calib) = null_split(problem, spec);
            let model = fit_binary(&rows(problem, train), &rows(problem, problem.nonnull_indices()), &spec.binary)?;
            shared_bh(model, &calib, 1)
        }
        MethodName::Adadetect => {
            let (train, calib) = null_split(problem, spec);
            let class1 = rows(problem, calib.iter().copied().chain(problem.test_indices()));
            let model = fit_binary(&rows(problem, train), &class1, &spec.binary)?;
            shared_bh(model, &calib, 1)
        }
        MethodName::Integ => {
            let (train, calib) = null_split(problem, spec);
            let (t1, c1) = nonnull_split(problem, spec);
            let s0 = fit_one_class(&rows(problem, train), &spec.one_class)?;
            let s1 = fit_one_class(&rows(problem, t1), &spec.one_class)?;
            let fit = IntegrativeFit::new(s0, s1, &rows(problem, calib.iter().copied()), &rows(problem, c1));
            let prov = IntegrativeProvider::new(fit, problem, &calib);
            let (out, p) = conditional_calibration(&prov, spec.alpha, spec.seed, ModifiedForm::PlusOne, None)?;
            Ok(MethodOutput {
                method: spec.name,
                report: out.into_report(n, spec.seed, None),
                pvalues: pvector(p, Reduction::CalibrationSymmetric),
                scores: test_scores(&prov)?,
                model_fits: 2,
                selected: None,
            })
        }
        other => Err(EcotError::Config(format!("{other} is not a baseline"))),
    }
}
