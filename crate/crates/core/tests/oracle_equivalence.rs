use ecot_core::methods::ecot_as_select;
use ecot_core::oracle::{
    oracle_full_ecot, oracle_full_ecot_ordered, oracle_selection_full, small_instance, suite_calibration_symmetric,
    suite_jackknife, suite_joint_symmetric, EnhancedAdaDetectFactory, OracleBudget, SelectionCandidate,
};
use ecot_core::pvalues::{FactoryProvider, ScoreProvider};
use ecot_core::scorers::{fit_binary, BinaryLearner, DataView, IntegrativeFactory, OneClassLearner};
use ecot_core::{CalibrationSet, Result, ScoreModel, SymmetryClass};

#[test]
fn suites_agree_on_fresh_seeds() {
    let b = OracleBudget::default();
    for r in [
        suite_calibration_symmetric(24, &b, 77, false).unwrap(),
        suite_joint_symmetric(24, &b, 77, false).unwrap(),
        suite_jackknife(12, &b, 77, false).unwrap(),
    ] {
        assert!(r.ok(), "{r:?}");
        assert_eq!(r.skipped, 0, "{r:?}");
        assert_eq!(r.max_discrepancy, 0.0);
    }
}

#[test]
fn enumeration_order_is_irrelevant() {
    let inst = small_instance(5, 3, 0, 3, 4).unwrap();
    let f = IntegrativeFactory { t1: vec![3, 4], learner: OneClassLearner::Knn { k: Some(1) } };
    let b = OracleBudget::default();
    let fwd = oracle_full_ecot_ordered(&inst.problem, &inst.calibration, &f, 0.5, 1, &b, false).unwrap();
    let rev = oracle_full_ecot_ordered(&inst.problem, &inst.calibration, &f, 0.5, 1, &b, true).unwrap();
    assert_eq!(fwd, rev);
}

#[test]
fn enhanced_adadetect_matches_full_enumeration() {
    let inst = small_instance(11, 3, 0, 2, 4).unwrap();
    let f = EnhancedAdaDetectFactory { learner: BinaryLearner::Logistic { l2: 1e-2, iterations: 50 } };
    let full = oracle_full_ecot(&inst.problem, &inst.calibration, &f, 0.5, 3, &OracleBudget::default()).unwrap();
    let provider = FactoryProvider::new(&inst.problem, &inst.calibration, &f);
    let reduced = ecot_core::pvalues::reduced_pvalues(&provider).unwrap();
    assert_eq!(full.pvalues, reduced);
}

#[test]
fn full_selection_matches_adjusted_selection_when_choice_is_stable() {
    let joint = |view: &DataView<'_>, _j: usize| -> Result<ScoreModel> {
        let p = view.problem();
        let c0 = view.rows(p.null_indices().chain(p.test_indices()));
        let c1 = view.rows(p.nonnull_indices());
        Ok(fit_binary(&c0, &c1, &BinaryLearner::Logistic { l2: 1e-2, iterations: 50 })?
            .tagged(SymmetryClass::JointSymmetric, "pool"))
    };
    let fixed = |_: &DataView<'_>, _j: usize| Ok(ScoreModel::fixed(|x: &[f64]| -x[0], "-x0"));
    let mut compared = 0;
    for seed in 0..12 {
        let inst = small_instance(seed, 3, 0, 2, 3).unwrap();
        let p = &inst.problem;
        let integ = IntegrativeFactory { t1: vec![3, 4], learner: OneClassLearner::Knn { k: Some(1) } };
        let l0 = CalibrationSet::all_null(p);
        let cands = [
            SelectionCandidate { factory: &joint, calibration: l0.clone() },
            SelectionCandidate { factory: &integ, calibration: l0.clone() },
            SelectionCandidate { factory: &fixed, calibration: l0.clone() },
        ];
        let full = oracle_selection_full(p, &cands, inst.alpha, inst.seed, &OracleBudget::default()).unwrap();
        let provs = [
            FactoryProvider::new(p, &l0, &joint),
            FactoryProvider::new(p, &l0, &integ),
            FactoryProvider::new(p, &l0, &fixed),
        ];
        let dyns: Vec<&dyn ScoreProvider> = provs.iter().map(|x| x as &dyn ScoreProvider).collect();
        let (_, pv, _, sel) = ecot_as_select(&dyns, inst.alpha, inst.seed, p.n()).unwrap();
        for t in 0..p.m() {
            if full.constant_selection[t] && full.selected[t] == sel[t] {
                assert_eq!(full.outcome.pvalues[t], pv[t], "seed {seed} position {t}");
                compared += 1;
            }
        }
    }
    assert!(compared >= 10, "only {compared} stable positions");
}
