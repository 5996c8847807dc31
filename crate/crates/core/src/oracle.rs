//! Brute-force reference implementations.
//!
//! Everything here enumerates `Ω_j` literally, refits the score on every
//! permuted view and runs the testing step from the resulting full-permutation
//! quantities. The reduced fast paths in [`crate::pvalues`] and
//! [`crate::methods`] are checked against these on small instances.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};
use crate::problem::{CalibrationSet, FeatureMatrix, RejectionReport, TestingProblem};
use crate::procedures::{bh, bh_count, calibrate, conditional_calibration};
use crate::pvalues::{
    jackknife_pvalues, rank_pvalue, sorted, FactoryProvider,
    FullPermutationScores, LeaveOneOutFactory, ModifiedForm, PermutationFamily,
};
use crate::rng::{derive_seed, stream, Stream};
use crate::scorers::{
    fit_binary, fit_one_class, BinaryLearner, DataView, FitSpec, IntegrativeFactory, Kernel, LocalizedFactory,
    OneClassLearner, ScoreFactory, ScoreModel, SymmetryClass,
};

/// Size limits for brute-force enumeration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleBudget {
    /// Largest `|C ∪ {j}|` enumerated.
    pub max_free_indices: usize,
    pub max_test_points: usize,
}

impl Default for OracleBudget {
    fn default() -> Self {
        Self { max_free_indices: 6, max_test_points: 8 }
    }
}

impl OracleBudget {
    pub fn check(&self, calibration_size: usize, m: usize) -> Result<()> {
        let free = calibration_size + 1;
        if free > self.max_free_indices {
            return Err(EcotError::BudgetExceeded { free, cap: self.max_free_indices });
        }
        if m > self.max_test_points {
            return Err(EcotError::BudgetExceeded { free: m, cap: self.max_test_points });
        }
        Ok(())
    }
}

/// Full-permutation p-values, the `|R_j|` they induce and the final report.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleOutcome {
    pub pvalues: Vec<f64>,
    pub r_sizes: Vec<usize>,
    pub report: RejectionReport,
}

fn finish(problem: &TestingProblem, per_j: Vec<(f64, Vec<f64>)>, alpha: f64, seed: u64) -> OracleOutcome {
    let (pvalues, r_sizes): (Vec<f64>, Vec<usize>) =
        per_j.into_iter().map(|(p, modified)| (p, bh_count(&modified, alpha))).unzip();
    let report = calibrate(&pvalues, &r_sizes, alpha, seed, None).into_report(problem.n(), seed, None);
    OracleOutcome { pvalues, r_sizes, report }
}

/// The unified procedure in full-permutation form: permutation p-values,
/// median-based modified p-values and conditional calibration.
pub fn oracle_full_ecot(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    factory: &dyn ScoreFactory,
    alpha: f64,
    seed: u64,
    budget: &OracleBudget,
) -> Result<OracleOutcome> {
    oracle_full_ecot_ordered(problem, calibration, factory, alpha, seed, budget, false)
}

/// [`oracle_full_ecot`] with a choice of enumeration order.
pub fn oracle_full_ecot_ordered(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    factory: &dyn ScoreFactory,
    alpha: f64,
    seed: u64,
    budget: &OracleBudget,
    reverse: bool,
) -> Result<OracleOutcome> {
    budget.check(calibration.len(), problem.m())?;
    let per_j = problem
        .test_indices()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(t, j)| {
            let full = FullPermutationScores::enumerate(problem, calibration, j, factory, reverse)?;
            Ok((full.pvalue(), full.modified(t)))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(problem, per_j, alpha, seed))
}

/// Jackknife-type scores in full-permutation form: `S^(j)_σ` is refitted on
/// the permuted pool `C ∪ U \ {j}`, and the modified p-values compare
/// `S^(ℓ)(X_ℓ)` with `S^(j)_σ(X_σ(j))`.
pub fn oracle_jackknife_ecot(
    problem: &TestingProblem,
    calibration: &CalibrationSet,
    factory: &dyn LeaveOneOutFactory,
    alpha: f64,
    seed: u64,
    budget: &OracleBudget,
) -> Result<OracleOutcome> {
    budget.check(calibration.len(), problem.m())?;
    let members: Vec<usize> = calibration.indices().iter().copied().chain(problem.test_indices()).collect();
    let loo = |view: &DataView<'_>, k: usize| -> Result<f64> {
        let pool = view.rows(members.iter().copied().filter(|&i| i != k));
        Ok(factory.fit(&pool)?.evaluate(view.row(k)))
    };
    let identity = DataView::identity(problem);
    let own: Vec<f64> = problem.test_indices().map(|l| loo(&identity, l)).collect::<Result<_>>()?;
    let per_j = problem
        .test_indices()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(t, j)| {
            let family = PermutationFamily::for_test(problem, calibration, j)?;
            let mut at_j = Vec::with_capacity(family.len());
            let mut err = None;
            family.for_each(false, |source| {
                if err.is_none() {
                    match loo(&DataView::permuted(problem, source), j) {
                        Ok(v) => at_j.push(v),
                        Err(e) => err = Some(e),
                    }
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            let frac = |x: f64| at_j.iter().filter(|&&s| x <= s).count() as f64 / at_j.len() as f64;
            let modified = own.iter().enumerate().map(|(l, &s)| if l == t { 0.0 } else { frac(s) }).collect();
            Ok((frac(own[t]), modified))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(problem, per_j, alpha, seed))
}

/// A candidate approach for full-permutation selection.
pub struct SelectionCandidate<'a> {
    pub factory: &'a dyn ScoreFactory,
    pub calibration: CalibrationSet,
}

/// Full-permutation selection outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionOutcome {
    pub outcome: OracleOutcome,
    /// `k*` under the identity arrangement, per test point.
    pub selected: Vec<usize>,
    /// Whether `k*_σ` is the same for every `σ ∈ Ω_j`, per test point.
    pub constant_selection: Vec<bool>,
}

/// Rejection count of one candidate on a (permuted) view: BH over its
/// reduced-form p-values.
fn candidate_rejections(
    problem: &TestingProblem,
    view: &DataView<'_>,
    cand: &SelectionCandidate<'_>,
    j: usize,
    alpha: f64,
) -> Result<(usize, ScoreModel)> {
    let mut own = None;
    let mut shared: Option<ScoreModel> = None;
    let mut p = Vec::with_capacity(problem.m());
    for l in problem.test_indices() {
        let model = match &shared {
            Some(s) => s.clone(),
            None => {
                let m = cand.factory.build(view, l)?;
                if m.symmetry() == SymmetryClass::JointSymmetric {
                    shared = Some(m.clone());
                }
                m
            }
        };
        let calib = sorted(&cand.calibration.indices().iter().map(|&i| model.evaluate(view.row(i))).collect::<Vec<_>>());
        p.push(rank_pvalue(&calib, model.evaluate(view.row(l))));
        if l == j {
            own = Some(model);
        }
    }
    Ok((bh_count(&p, alpha), own.expect("j is a test index")))
}

/// Approach selection with per-arrangement re-selection: `C = ∪_k C_k`, and
/// for every `σ ∈ Ω_j` each candidate is re-run on the permuted data,
/// `k*_σ` maximizes the rejection count (lowest index on ties), and the
/// p-value compares `S^(j),k*(X_j)` with `S^(j),k*_σ_σ(X_σ(j))`.
pub fn oracle_selection_full(
    problem: &TestingProblem,
    candidates: &[SelectionCandidate<'_>],
    alpha: f64,
    seed: u64,
    budget: &OracleBudget,
) -> Result<SelectionOutcome> {
    if candidates.is_empty() {
        return Err(EcotError::Config("empty candidate list".into()));
    }
    let mut union: Vec<usize> = candidates.iter().flat_map(|c| c.calibration.indices().iter().copied()).collect();
    union.sort_unstable();
    union.dedup();
    let calibration = CalibrationSet::labeled(problem, union)?;
    budget.check(calibration.len(), problem.m())?;
    let select = |view: &DataView<'_>, j: usize| -> Result<(usize, ScoreModel)> {
        let mut best: Option<(usize, usize, ScoreModel)> = None;
        for (k, c) in candidates.iter().enumerate() {
            let (r, model) = candidate_rejections(problem, view, c, j, alpha)?;
            if best.as_ref().is_none_or(|(_, br, _)| r > *br) {
                best = Some((k, r, model));
            }
        }
        let (k, _, model) = best.expect("non-empty");
        Ok((k, model))
    };
    let per_j = problem
        .test_indices()
        .enumerate()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(t, j)| {
            let (k_star, model) = select(&DataView::identity(problem), j)?;
            let observed = model.evaluate(problem.row(j));
            let family = PermutationFamily::for_test(problem, &calibration, j)?;
            let mut at_j = Vec::with_capacity(family.len());
            let mut at_test = vec![Vec::with_capacity(family.len()); problem.m()];
            let mut constant = true;
            let mut err = None;
            family.for_each(false, |source| {
                if err.is_some() {
                    return;
                }
                let view = DataView::permuted(problem, source);
                match select(&view, j) {
                    Ok((k, m)) => {
                        constant &= k == k_star;
                        at_j.push(m.evaluate(view.row(j)));
                        for (u, l) in problem.test_indices().enumerate() {
                            at_test[u].push(m.evaluate(problem.row(l)));
                        }
                    }
                    Err(e) => err = Some(e),
                }
            });
            if let Some(e) = err {
                return Err(e);
            }
            let full = FullPermutationScores { observed, at_j, at_test };
            Ok(((full.pvalue(), full.modified(t)), (k_star, constant)))
        })
        .collect::<Result<Vec<_>>>()?;
    let (per_j, sel): (Vec<_>, Vec<_>) = per_j.into_iter().unzip();
    let (selected, constant_selection) = sel.into_iter().unzip();
    Ok(SelectionOutcome { outcome: finish(problem, per_j, alpha, seed), selected, constant_selection })
}

/// One null draw for the super-uniformity check. Draws with `is_null = false`
/// are counted in the denominator but never in `F̂`, so the check bounds the
/// joint probability `P(p ≤ t, null)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NullDraw {
    pub pvalue: f64,
    pub is_null: bool,
}

impl From<f64> for NullDraw {
    fn from(pvalue: f64) -> Self {
        Self { pvalue, is_null: true }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperUniformityReport {
    pub draws: usize,
    /// `max_t (F̂(t) − t)` over the grid.
    pub max_excess: f64,
    /// Binomial SE `sqrt(t(1−t)/N)` at the maximizing `t`.
    pub se_at_max: f64,
    pub t_at_max: f64,
    /// Largest `(F̂(t) − t) / sqrt(t(1−t)/N)` over interior grid points.
    pub max_z: f64,
    /// `F̂(t) ≤ t + 3·sqrt(t(1−t)/N)` at every grid point.
    pub passes: bool,
}

/// Evaluates the empirical CDF of `n` independent draws on the grid
/// `t = 1/100, 2/100, …, 1`. Draw `i` receives seed `derive_seed(seed, i)`.
pub fn oracle_superuniformity<F>(sampler: F, n: usize, seed: u64) -> Result<SuperUniformityReport>
where
    F: Fn(u64) -> Result<NullDraw> + Sync,
{
    if n < 1000 {
        return Err(EcotError::Parameter(format!("super-uniformity needs at least 1000 draws, got {n}")));
    }
    let draws: Vec<NullDraw> = (0..n as u64).into_par_iter().map(|i| sampler(derive_seed(seed, i))).collect::<Result<_>>()?;
    let mut nulls: Vec<f64> = draws.iter().filter(|d| d.is_null).map(|d| d.pvalue).collect();
    nulls.sort_unstable_by(|a, b| a.total_cmp(b));
    let nf = n as f64;
    let mut report = SuperUniformityReport {
        draws: n,
        max_excess: f64::NEG_INFINITY,
        se_at_max: 0.0,
        t_at_max: 0.0,
        max_z: f64::NEG_INFINITY,
        passes: true,
    };
    for k in 1..=100 {
        let t = k as f64 / 100.0;
        let f = nulls.partition_point(|&p| p <= t) as f64 / nf;
        let se = (t * (1.0 - t) / nf).sqrt();
        let excess = f - t;
        if excess > report.max_excess {
            report.max_excess = excess;
            report.se_at_max = se;
            report.t_at_max = t;
        }
        if se > 0.0 {
            report.max_z = report.max_z.max(excess / se);
        }
        if f > t + 3.0 * se {
            report.passes = false;
        }
    }
    Ok(report)
}

/// Enhanced AdaDetect: a binary classifier separating `Du \ {X_j}` (class 1)
/// from `D0 ∪ {X_j}` (class 0), refitted for every test point. Symmetric in
/// `L0 ∪ {j}`, so `C = L0`. Needs `m` fits per run and is restricted to
/// `m ≤ 20`.
#[derive(Debug, Clone, Default)]
pub struct EnhancedAdaDetectFactory {
    pub learner: BinaryLearner,
}

impl EnhancedAdaDetectFactory {
    pub const MAX_TEST_POINTS: usize = 20;
}

impl ScoreFactory for EnhancedAdaDetectFactory {
    fn build(&self, data: &DataView<'_>, j: usize) -> Result<ScoreModel> {
        let p = data.problem();
        if p.m() > Self::MAX_TEST_POINTS {
            return Err(EcotError::Config(format!(
                "enhanced AdaDetect refits per test point and is limited to m ≤ {}",
                Self::MAX_TEST_POINTS
            )));
        }
        let class0 = data.rows(p.null_indices().chain(std::iter::once(j)));
        let class1 = data.rows(p.test_indices().filter(|&l| l != j));
        if class1.is_empty() {
            return Err(EcotError::Config("enhanced AdaDetect needs at least 2 test points".into()));
        }
        Ok(fit_binary(&class0, &class1, &self.learner)?
            .tagged(SymmetryClass::CalibrationSymmetric, "class1 = Du \\ {j}, class0 = D0 ∪ {j}"))
    }
}

/// One-class score fitted on `C ∪ {j} ∪ extra`; calibration-symmetric.
#[derive(Debug, Clone)]
pub struct PooledOneClassFactory {
    pub calibration: Vec<usize>,
    pub extra: Vec<usize>,
    pub learner: OneClassLearner,
}

impl ScoreFactory for PooledOneClassFactory {
    fn build(&self, data: &DataView<'_>, j: usize) -> Result<ScoreModel> {
        let pool = data.rows(self.calibration.iter().chain(&self.extra).copied().chain(std::iter::once(j)));
        Ok(fit_one_class(&pool, &self.learner)?.tagged(SymmetryClass::CalibrationSymmetric, "C ∪ {j} ∪ extra"))
    }
}

/// A deliberately broken score: distance to whatever row sits at the first
/// calibration position, falsely tagged calibration-symmetric. Used to prove
/// the checks can fail.
#[derive(Debug, Clone)]
pub struct OrderDependentFactory {
    pub anchor_position: usize,
}

impl ScoreFactory for OrderDependentFactory {
    fn build(&self, data: &DataView<'_>, _j: usize) -> Result<ScoreModel> {
        let anchor = data.row(self.anchor_position).to_vec();
        let f = move |x: &[f64]| x.iter().zip(&anchor).map(|(a, b)| (a - b).abs()).sum::<f64>();
        Ok(ScoreModel::new(crate::scorers::FnScorer(f), SymmetryClass::CalibrationSymmetric, FitSpec::new("anchor", "first calibration row")))
    }
}

/// Result of one equivalence suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub name: String,
    pub instances: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    /// Largest absolute p-value difference between the compared paths.
    pub max_discrepancy: f64,
}

impl SuiteResult {
    fn new(name: &str) -> Self {
        Self { name: name.into(), instances: 0, passed: 0, failed: 0, skipped: 0, max_discrepancy: 0.0 }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0
    }

    fn record(&mut self, outcome: Result<(bool, f64)>) -> Result<()> {
        self.instances += 1;
        match outcome {
            Ok((pass, disc)) => {
                self.max_discrepancy = self.max_discrepancy.max(disc);
                if pass {
                    self.passed += 1;
                } else {
                    self.failed += 1;
                }
                Ok(())
            }
            Err(EcotError::BudgetExceeded { .. }) => {
                self.skipped += 1;
                Ok(())
            }
            Err(e) => Err(e),
        }
    }
}

/// A random small instance for the equivalence suites.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub problem: TestingProblem,
    pub calibration: CalibrationSet,
    pub alpha: f64,
    pub seed: u64,
}

/// `n0 = c + extra_null` nulls in 2-D, `n1` non-nulls shifted by 3, and `m`
/// test points of which roughly half are shifted by 3. The calibration set is
/// the first `c` nulls.
pub fn small_instance(seed: u64, c: usize, extra_null: usize, n1: usize, m: usize) -> Result<SmallInstance> {
    let mut rng = stream(seed, Stream::Oracle);
    let d = 2;
    let mut draw = |k: usize, shift: &mut dyn FnMut() -> f64| -> Result<FeatureMatrix> {
        let mut v = Vec::with_capacity(k * d);
        for _ in 0..k {
            let s = shift();
            for _ in 0..d {
                v.push(s + rng.sample::<f64, _>(StandardNormal));
            }
        }
        FeatureMatrix::new(v, d)
    };
    let null = draw(c + extra_null, &mut || 0.0)?;
    let nonnull = draw(n1, &mut || 3.0)?;
    let mut flips = stream(derive_seed(seed, 1), Stream::Oracle);
    let test = draw(m, &mut || if flips.random_bool(0.5) { 3.0 } else { 0.0 })?;
    let problem = TestingProblem::new(null, nonnull, test)?;
    let calibration = CalibrationSet::null(&problem, (0..c).collect())?;
    let alpha = [0.1, 0.2, 0.3, 0.5, 0.8][rng.random_range(0..5)];
    Ok(SmallInstance { problem, calibration, alpha, seed: derive_seed(seed, 2) })
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Full-permutation ECOT against the reduced path for calibration-symmetric
/// factories (integrative, localized, enhanced AdaDetect, pooled one-class),
/// rotating through them by instance. Compares p-values with `==` and
/// rejection sets for set equality. `broken` swaps in an order-dependent score.
pub fn suite_calibration_symmetric(instances: usize, budget: &OracleBudget, seed: u64, broken: bool) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("calibration-symmetric reduction");
    let max_c = budget.max_free_indices.saturating_sub(1).min(4);
    let max_m = budget.max_test_points.min(5);
    for i in 0..instances {
        if budget.max_free_indices == 0 || max_m == 0 {
            res.record(Err(EcotError::BudgetExceeded { free: 1, cap: budget.max_free_indices }))?;
            continue;
        }
        let s = derive_seed(seed, i as u64);
        let mut rng = stream(s, Stream::Oracle);
        let kind = if broken { 4 } else { i % 4 };
        // integrative, enhanced AdaDetect and the anchor score need a non-empty
        // L0; enhanced AdaDetect needs two test points
        let min_c = usize::from(matches!(kind, 0 | 2 | 4));
        let min_m = if kind == 2 { 2 } else { 1 };
        if min_c > max_c || min_m > max_m {
            res.record(Err(EcotError::BudgetExceeded { free: min_c + 1, cap: budget.max_free_indices }))?;
            continue;
        }
        let m = rng.random_range(min_m..=max_m);
        let c = rng.random_range(min_c..=max_c);
        // integrative and enhanced AdaDetect calibrate on all of L0
        let extra = if matches!(kind, 0 | 2) { 0 } else { 2 };
        let inst = small_instance(s, c, extra, 3, m)?;
        let p = &inst.problem;
        let factory: Box<dyn ScoreFactory> = match kind {
            0 => Box::new(IntegrativeFactory { t1: vec![p.n0(), p.n0() + 1], learner: OneClassLearner::Knn { k: Some(1) } }),
            1 => Box::new(LocalizedFactory {
                train: (c..p.n0()).collect(),
                calibration: (0..c).collect(),
                kernel: Kernel::Gaussian { bandwidth: 1.0 },
                learner: OneClassLearner::Knn { k: Some(1) },
            }),
            2 => Box::new(EnhancedAdaDetectFactory { learner: BinaryLearner::Logistic { l2: 1e-2, iterations: 50 } }),
            3 => Box::new(PooledOneClassFactory {
                calibration: (0..c).collect(),
                extra: p.nonnull_indices().collect(),
                learner: OneClassLearner::Kde { bandwidth: None },
            }),
            _ => Box::new(OrderDependentFactory { anchor_position: 0 }),
        };
        res.record(compare_full_reduced(&inst, factory.as_ref(), budget))?;
    }
    Ok(res)
}

fn compare_full_reduced(inst: &SmallInstance, factory: &dyn ScoreFactory, budget: &OracleBudget) -> Result<(bool, f64)> {
    let full = oracle_full_ecot(&inst.problem, &inst.calibration, factory, inst.alpha, inst.seed, budget)?;
    let provider = FactoryProvider::new(&inst.problem, &inst.calibration, factory);
    let (out, p) = conditional_calibration(&provider, inst.alpha, inst.seed, ModifiedForm::Standard, None)?;
    let reduced = out.into_report(inst.problem.n(), inst.seed, None);
    let same = full.pvalues == p && full.report.rejected == reduced.rejected && full.r_sizes == reduced.r_j_sizes;
    Ok((same, max_abs_diff(&full.pvalues, &p)))
}

/// Full-permutation ECOT with joint-symmetric factories (binary on `D1` vs
/// `D0 ∪ Du`, one-class on `D0 ∪ Du`, a fixed score) against plain BH over
/// the basic conformal p-values.
pub fn suite_joint_symmetric(instances: usize, budget: &OracleBudget, seed: u64, broken: bool) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("joint-symmetric collapse to BH");
    let max_c = budget.max_free_indices.saturating_sub(1).min(4);
    let max_m = budget.max_test_points.min(5);
    for i in 0..instances {
        if budget.max_free_indices == 0 || max_m == 0 {
            res.record(Err(EcotError::BudgetExceeded { free: 1, cap: budget.max_free_indices }))?;
            continue;
        }
        let s = derive_seed(seed, i as u64);
        let mut rng = stream(s, Stream::Oracle);
        let m = rng.random_range(1..=max_m);
        let c = rng.random_range(0..=max_c);
        let inst = small_instance(s, c, 2, 2, m)?;
        let kind = if broken { 3 } else { i % 3 };
        let joint = |model: ScoreModel| model.tagged(SymmetryClass::JointSymmetric, "pool");
        let factory = move |view: &DataView<'_>, _j: usize| -> Result<ScoreModel> {
            let p = view.problem();
            match kind {
                0 => {
                    let c0 = view.rows(p.null_indices().chain(p.test_indices()));
                    let c1 = view.rows(p.nonnull_indices());
                    Ok(joint(fit_binary(&c0, &c1, &BinaryLearner::Logistic { l2: 1e-2, iterations: 50 })?))
                }
                1 => Ok(joint(fit_one_class(
                    &view.rows(p.null_indices().chain(p.test_indices())),
                    &OneClassLearner::Knn { k: Some(1) },
                )?)),
                2 => Ok(ScoreModel::fixed(|x: &[f64]| x[0] + x[1], "sum")),
                _ => Ok(joint(OrderDependentFactory { anchor_position: 0 }.build(view, 0)?)),
            }
        };
        res.record((|| {
            let full = oracle_full_ecot(&inst.problem, &inst.calibration, &factory, inst.alpha, inst.seed, budget)?;
            let model = factory(&DataView::identity(&inst.problem), inst.problem.n())?;
            let calib = sorted(
                &inst.calibration.indices().iter().map(|&i| model.evaluate(inst.problem.row(i))).collect::<Vec<_>>(),
            );
            let p: Vec<f64> = inst.problem.test_indices().map(|l| rank_pvalue(&calib, model.evaluate(inst.problem.row(l)))).collect();
            let expected: Vec<usize> = bh(&p, inst.alpha).into_iter().map(|t| t + inst.problem.n()).collect();
            Ok((full.pvalues == p && full.report.rejected == expected, max_abs_diff(&full.pvalues, &p)))
        })())?;
    }
    Ok(res)
}

/// Full-permutation jackknife ECOT (with the jackknife modified p-values)
/// against BH over the jackknife p-values.
pub fn suite_jackknife(instances: usize, budget: &OracleBudget, seed: u64, broken: bool) -> Result<SuiteResult> {
    let mut res = SuiteResult::new("jackknife collapse to BH");
    let max_c = budget.max_free_indices.saturating_sub(1).min(4);
    let max_m = budget.max_test_points.min(4);
    for i in 0..instances {
        if budget.max_free_indices == 0 || max_m == 0 {
            res.record(Err(EcotError::BudgetExceeded { free: 1, cap: budget.max_free_indices }))?;
            continue;
        }
        let s = derive_seed(seed, i as u64);
        let mut rng = stream(s, Stream::Oracle);
        let m = rng.random_range(1..=max_m);
        // the leave-one-out pool must hold at least two rows
        let c = rng.random_range(0..=max_c).max(3usize.saturating_sub(m));
        if c > max_c {
            res.record(Err(EcotError::BudgetExceeded { free: c + 1, cap: budget.max_free_indices }))?;
            continue;
        }
        let inst = small_instance(s, c, 1, 0, m)?;
        let learner = if i % 2 == 0 { OneClassLearner::Knn { k: Some(1) } } else { OneClassLearner::Kde { bandwidth: Some(1.0) } };
        res.record((|| {
            let p = &inst.problem;
            if broken {
                // scores the first pool row only: order dependent, caught by the probe
                let bad = |pool: &[&[f64]]| {
                    let a = pool[0].to_vec();
                    Ok(ScoreModel::fixed(move |x: &[f64]| (x[0] - a[0]).abs(), "first"))
                };
                return match jackknife_pvalues(p, &inst.calibration, &bad) {
                    Err(EcotError::Contract(_)) => Ok((false, 1.0)),
                    Err(e) => Err(e),
                    Ok(_) => Ok((true, 0.0)),
                };
            }
            let factory = |pool: &[&[f64]]| fit_one_class(pool, &learner);
            let full = oracle_jackknife_ecot(p, &inst.calibration, &factory, inst.alpha, inst.seed, budget)?;
            let jk = jackknife_pvalues(p, &inst.calibration, &factory)?;
            let expected: Vec<usize> = bh(&jk.values, inst.alpha).into_iter().map(|t| t + p.n()).collect();
            Ok((full.pvalues == jk.values && full.report.rejected == expected, max_abs_diff(&full.pvalues, &jk.values)))
        })())?;
    }
    Ok(res)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_calibration_gives_unit_pvalues() {
        let inst = small_instance(3, 0, 2, 2, 4).unwrap();
        let f = |_: &DataView<'_>, _: usize| Ok(ScoreModel::fixed(|x: &[f64]| x[0], "x"));
        let out = oracle_full_ecot(&inst.problem, &inst.calibration, &f, 0.5, 1, &OracleBudget::default()).unwrap();
        assert!(out.pvalues.iter().all(|&p| p == 1.0));
        assert!(out.report.rejected.is_empty());
    }

    #[test]
    fn budget_refusal() {
        let inst = small_instance(3, 6, 0, 0, 2).unwrap();
        let f = |_: &DataView<'_>, _: usize| Ok(ScoreModel::fixed(|x: &[f64]| x[0], "x"));
        assert!(matches!(
            oracle_full_ecot(&inst.problem, &inst.calibration, &f, 0.5, 1, &OracleBudget::default()),
            Err(EcotError::BudgetExceeded { free: 7, cap: 6 })
        ));
    }

    #[test]
    fn checker_accepts_uniform_draws() {
        let r = oracle_superuniformity(|s| Ok(stream(s, Stream::Oracle).random::<f64>().into()), 5000, 9).unwrap();
        assert!(r.passes, "{r:?}");
    }

    #[test]
    fn suites_pass_small() {
        let b = OracleBudget::default();
        for r in [
            suite_calibration_symmetric(12, &b, 1, false).unwrap(),
            suite_joint_symmetric(9, &b, 1, false).unwrap(),
            suite_jackknife(6, &b, 1, false).unwrap(),
        ] {
            assert!(r.ok() && r.passed > r.skipped, "{r:?}");
        }
    }

    #[test]
    fn broken_scorer_is_caught() {
        let b = OracleBudget::default();
        let r = suite_calibration_symmetric(12, &b, 1, true).unwrap();
        assert!(r.failed > 0, "{r:?}");
        assert!(suite_jackknife(6, &b, 1, true).unwrap().failed > 0);
    }

    #[test]
    fn zero_budget_skips_everything() {
        let b = OracleBudget { max_free_indices: 0, max_test_points: 8 };
        let r = suite_calibration_symmetric(5, &b, 1, false).unwrap();
        assert_eq!((r.skipped, r.failed), (5, 0));
    }
}
