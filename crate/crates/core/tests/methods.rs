use ecot_core::methods::{ecot_as_select, fullnd_model, run, run_joint_selection, MethodName, MethodSpec};
use ecot_core::pvalues::{ScoreProvider, SharedScores};
use ecot_core::scorers::{oracle_gaussian_ratio, OneClassLearner};
use ecot_core::sim::{generate, Scenario, ScenarioConfig};
use ecot_core::{CalibrationSet, EcotError, FeatureMatrix, ScoreModel, TestingProblem};

fn one_d(null: &[f64], nonnull: &[f64], test: &[f64]) -> TestingProblem {
    let m = |v: &[f64]| FeatureMatrix::new(v.to_vec(), 1).unwrap();
    TestingProblem::new(m(null), m(nonnull), m(test)).unwrap()
}

fn scenario(kind: Scenario, a: f64, seed: u64) -> ScenarioConfig {
    ScenarioConfig { scenario: kind, d: 10, a, pi: 0.9, n0: 160, n1: 40, m: 200, seed }
}

/// Mean distance to the `ceil(sqrt(n))` (at most `n − 1`) nearest pool points.
fn knn(pool: &[f64], x: f64) -> f64 {
    let k = ((pool.len() as f64).sqrt().ceil() as usize).clamp(1, pool.len() - 1);
    let mut d: Vec<f64> = pool.iter().map(|y| (x - y).abs()).collect();
    d.sort_by(f64::total_cmp);
    d[..k].iter().sum::<f64>() / k as f64
}

#[test]
fn ecot_oc_matches_hand_evaluation() {
    let (d0, d1, du) = ([0.0, 0.4, -0.3, 0.9], [5.0, 6.0], [0.2, 8.0, 5.5]);
    let p = one_d(&d0, &d1, &du);
    let out = run(&p, &MethodSpec::new(MethodName::EcotOc).with_alpha(0.5).with_seed(4)).unwrap();
    let pool: Vec<f64> = d0.iter().chain(&du).copied().collect();
    let s0 = |x: f64| knn(&pool, x);
    let s1 = |x: f64| knn(&d1, x);
    for (t, &xj) in du.iter().enumerate() {
        let score = |x: f64| {
            let u0 = d0.iter().chain([&xj]).filter(|&&y| s0(x) <= s0(y)).count() as f64 / 5.0;
            let u1 = (d1.iter().filter(|&&y| s1(x) <= s1(y)).count() + 1) as f64 / 3.0;
            -u0 / u1
        };
        let expected = (1 + d0.iter().filter(|&&y| score(y) >= score(xj)).count()) as f64 / 5.0;
        assert_eq!(out.pvalues.values[t], expected, "test point {t}");
    }
    assert_eq!(out.pvalues.values[1], 0.2);
}

#[test]
fn ecot_bi_fits_once_and_needs_nonnulls() {
    let g = generate(&scenario(Scenario::MeanShift, 1.5, 3)).unwrap();
    let out = run(&g.problem, &MethodSpec::new(MethodName::EcotBi)).unwrap();
    assert_eq!(out.model_fits, 1);
    let bare = g.problem.without_nonnull();
    assert!(matches!(run(&bare, &MethodSpec::new(MethodName::EcotBi)), Err(EcotError::Config(_))));
}

#[test]
fn single_candidate_selection_equals_the_candidate() {
    let g = generate(&scenario(Scenario::MeanShift, 1.5, 8)).unwrap();
    for (name, joint) in [(MethodName::EcotBi, true), (MethodName::EcotOc, false), (MethodName::Fullnd, true)] {
        let alone = run(&g.problem, &MethodSpec::new(name).with_seed(2)).unwrap();
        let selected = run(&g.problem, &MethodSpec::new(MethodName::EcotAs).with_seed(2).with_candidates(vec![name])).unwrap();
        assert_eq!(alone.pvalues.values, selected.pvalues.values, "{name}");
        assert_eq!(alone.report.rejected, selected.report.rejected, "{name}");
        if joint {
            let js = run(&g.problem, &MethodSpec::new(MethodName::EcotAsJoint).with_seed(2).with_candidates(vec![name]))
                .unwrap();
            assert_eq!(alone.report.rejected, js.report.rejected, "{name}");
        }
    }
}

#[test]
fn joint_selection_prefers_larger_criterion() {
    // L0 = {0, 1}, L1 = {2, 3}, U = {4, 5}
    let p = one_d(&[0.0, 1.0], &[5.0, 6.0], &[0.5, 5.5]);
    let up = ScoreModel::fixed(|x: &[f64]| x[0], "x");
    let down = ScoreModel::fixed(|x: &[f64]| -x[0], "-x");
    let criterion = |f: &dyn Fn(f64) -> f64| {
        let pooled = [0.0, 1.0, 0.5, 5.5];
        let l1 = [5.0, 6.0];
        pooled.iter().map(|&x| l1.iter().filter(|&&y| f(y) >= f(x)).count() as f64 / 2.0).sum::<f64>() / 4.0
    };
    let (m_up, m_down) = (criterion(&|x| x), criterion(&|x| -x));
    assert!(m_up > m_down);
    let out = run_joint_selection(&p, &[down.clone(), up.clone()], 0.5, 1).unwrap();
    assert_eq!(out.selected, Some(vec![1]));
    // ties go to the lowest index
    let out = run_joint_selection(&p, &[up.clone(), up], 0.5, 1).unwrap();
    assert_eq!(out.selected, Some(vec![0]));
}

#[test]
fn null_only_baselines_ignore_nonnull_data() {
    let g = generate(&scenario(Scenario::VarianceShift, 6.0, 5)).unwrap();
    let bare = g.problem.without_nonnull();
    for name in [MethodName::CpOc, MethodName::Adadetect, MethodName::Fullnd] {
        let spec = MethodSpec::new(name).with_seed(9);
        let a = run(&g.problem, &spec).unwrap();
        let b = run(&bare, &spec).unwrap();
        assert_eq!(a.pvalues.values, b.pvalues.values, "{name}");
        // global indices shift by n1; test positions must agree
        let pos = |r: &[usize], n: usize| r.iter().map(|i| i - n).collect::<Vec<_>>();
        assert_eq!(pos(&a.report.rejected, g.problem.n()), pos(&b.report.rejected, bare.n()), "{name}");
    }
}

#[test]
fn selection_finds_the_oracle_score_under_strong_signal() {
    let mut hits = 0;
    let reps = 30;
    for r in 0..reps {
        let cfg = scenario(Scenario::MeanShift, 2.0, 100 + r);
        let g = generate(&cfg).unwrap();
        let p = &g.problem;
        let c = CalibrationSet::all_null(p);
        let weak = fullnd_model(p, &OneClassLearner::default()).unwrap();
        let oracle = oracle_gaussian_ratio(cfg.mean_vector(), cfg.pi).unwrap();
        let provs =
            [SharedScores::from_model(&weak, p, &c).unwrap(), SharedScores::from_model(&oracle, p, &c).unwrap()];
        let dyns: Vec<&dyn ScoreProvider> = provs.iter().map(|x| x as &dyn ScoreProvider).collect();
        let (_, _, _, selected) = ecot_as_select(&dyns, 0.1, r, p.n()).unwrap();
        if selected.iter().filter(|&&k| k == 1).count() * 2 > selected.len() {
            hits += 1;
        }
    }
    assert!(hits * 10 >= reps * 9, "oracle chosen in {hits}/{reps} replicates");
}

#[test]
fn unknown_spec_keys_are_rejected() {
    let err = serde_json::from_str::<MethodSpec>(r#"{"name": "ecot-bi", "alpah": 0.1}"#);
    assert!(err.is_err());
    let ok: MethodSpec = serde_json::from_str(r#"{"name": "ecot-as", "candidates": ["ecot-bi", "fullnd"]}"#).unwrap();
    assert_eq!(ok.resolved_candidates(), vec![MethodName::EcotBi, MethodName::Fullnd]);
}
