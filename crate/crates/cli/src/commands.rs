use std::path::{Path, PathBuf};

use ecot_core::methods::run;
use ecot_core::oracle::{suite_calibration_symmetric, suite_jackknife, suite_joint_symmetric, SuiteResult};
use ecot_core::sim::monte_carlo_paired;
use ecot_core::{fdp_and_power, TestingProblem};
use serde_json::json;

use crate::config::{RunConfig, SimulateConfig, TestConfig};
use crate::data::{dataset_csv, read_dataset, Dataset};
use crate::error::{CliError, Result};
use crate::output::{csv_bytes, csv_preamble, envelope, json_bytes};

/// Files to write, by name.
pub type Files = Vec<(String, Vec<u8>)>;

pub fn simulate(cfg: &RunConfig) -> Result<Files> {
    let sim: &SimulateConfig =
        cfg.simulate.as_ref().ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
    let points: Vec<(String, Option<f64>, _)> = match &sim.grid {
        Some(g) => g
            .values
            .iter()
            .map(|&v| Ok((g.parameter.as_str().to_string(), Some(v), g.parameter.apply(&sim.scenario, v)?)))
            .collect::<Result<_>>()?,
        None => vec![("-".to_string(), None, sim.scenario.clone())],
    };
    let mut results = Vec::new();
    let mut rows: Vec<Vec<String>> = Vec::new();
    for (param, value, scenario) in &points {
        let reports = monte_carlo_paired(&sim.methods, scenario, sim.replicates, cfg.seed)?;
        let mut methods = Vec::new();
        for (spec, r) in sim.methods.iter().zip(&reports) {
            methods.push(json!({
                "method": spec,
                "replicates": r.replicates,
                "fdr_mean": r.fdr_mean,
                "fdr_se": r.fdr_se,
                "power_mean": r.power_mean,
                "power_se": r.power_se,
            }));
            rows.push(vec![
                spec.name.to_string(),
                param.clone(),
                value.map(|v| v.to_string()).unwrap_or_default(),
                r.fdr_mean.to_string(),
                r.fdr_se.to_string(),
                r.power_mean.to_string(),
                r.power_se.to_string(),
            ]);
        }
        results.push(json!({"parameter": param, "value": value, "scenario": scenario, "methods": methods}));
    }
    let mut files = Files::new();
    if cfg.format.json() {
        files.push(("simulate.json".into(), json_bytes(&envelope("simulate", cfg, results))));
    }
    if cfg.format.csv() {
        let header = ["method", "parameter", "value", "fdr", "fdr_se", "power", "power_se"];
        files.push(("simulate.csv".into(), csv_bytes(&csv_preamble("simulate", cfg), &header, &rows)?));
    }
    Ok(files)
}

/// The data of replicate 0 at the first grid point, in the dataset CSV
/// schema; test labels are included as ground truth.
pub fn export_data(cfg: &RunConfig) -> Result<Files> {
    let sim = cfg.simulate.as_ref().ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
    let scenario = match &sim.grid {
        Some(g) => g.parameter.apply(&sim.scenario, g.values[0])?,
        None => sim.scenario.clone(),
    };
    let (data_seed, _) = ecot_core::sim::replicate_seeds(cfg.seed, 0);
    let g = ecot_core::sim::generate(&scenario.with_seed(data_seed))?;
    let p = &g.problem;
    let rows = |idx: std::ops::Range<usize>| idx.map(|i| p.row(i).to_vec()).collect::<Vec<_>>();
    let labeled = Dataset {
        rows: rows(0..p.n()),
        labels: p.null_indices().map(|_| Some(0)).chain(p.nonnull_indices().map(|_| Some(1))).collect(),
        dim: p.dim(),
    };
    let test = Dataset { rows: rows(p.test_indices()), labels: g.labels.iter().map(|&l| Some(u8::from(l))).collect(), dim: p.dim() };
    Ok(vec![("data-labeled.csv".into(), dataset_csv(&labeled)?), ("data-test.csv".into(), dataset_csv(&test)?)])
}

fn required<'a>(p: &'a Option<PathBuf>, what: &str) -> Result<&'a Path> {
    p.as_deref().ok_or_else(|| CliError::Config(format!("missing {what} dataset path")))
}

pub fn test(cfg: &RunConfig) -> Result<Files> {
    let default = TestConfig::default();
    let t = cfg.test.as_ref().unwrap_or(&default);
    let labeled_path = required(&t.labeled, "labeled")?;
    let test_path = required(&t.data, "test")?;
    let labeled = read_dataset(labeled_path)?;
    let test = read_dataset(test_path)?;
    if labeled.dim != test.dim {
        return Err(CliError::data(
            test_path,
            format!("{} feature columns, but the labeled file has {}", test.dim, labeled.dim),
        ));
    }
    let (null, nonnull) = labeled.split_labeled(labeled_path)?;
    if null.nrows() == 0 {
        return Err(CliError::data(labeled_path, "no rows with label 0"));
    }
    let truth = test.test_labels(test_path)?;
    let problem = TestingProblem::new(null, nonnull, test.features()?)?;
    let out = run(&problem, &t.method)?;
    let n = problem.n();
    let rejected: Vec<usize> = out.report.rejected.iter().map(|i| i - n).collect();
    let mut flags = vec![false; problem.m()];
    rejected.iter().for_each(|&t| flags[t] = true);

    let mut summary = json!({
        "method": t.method.name,
        "alpha": t.method.alpha,
        "n0": problem.n0(),
        "n1": problem.n1(),
        "m": problem.m(),
        "rejections": rejected.len(),
        "rejected": rejected,
        "null_proportion_estimate": out.report.null_prop_estimate,
        "pruned": out.report.pruned,
        "model_fits": out.model_fits,
        "selected": out.selected,
    });
    if let Some(labels) = &truth {
        let (fdp, tpp) = fdp_and_power(&out.report.rejected, problem.test_indices(), labels)?;
        summary["fdp"] = json!(fdp);
        summary["power"] = json!(tpp);
    }
    let mut files = Files::new();
    if cfg.format.json() {
        files.push(("test-summary.json".into(), json_bytes(&envelope("test", cfg, summary))));
    }
    if cfg.format.csv() {
        let rows: Vec<Vec<String>> = (0..problem.m())
            .map(|t| {
                vec![t.to_string(), out.scores[t].to_string(), out.pvalues.values[t].to_string(), flags[t].to_string()]
            })
            .collect();
        files.push(("test-results.csv".into(), csv_bytes(&csv_preamble("test", cfg), &["index", "score", "p_value", "rejected"], &rows)?));
    }
    Ok(files)
}

pub struct OracleCheck {
    pub suites: Vec<SuiteResult>,
    pub files: Files,
}

impl OracleCheck {
    pub fn passed(&self) -> bool {
        self.suites.iter().all(SuiteResult::ok)
    }

    pub fn table(&self) -> String {
        let mut s = format!(
            "{:<36} {:>9} {:>6} {:>6} {:>7} {:>15}  status\n",
            "check", "instances", "passed", "failed", "skipped", "max discrepancy"
        );
        for r in &self.suites {
            let status = if !r.ok() {
                "FAIL"
            } else if r.skipped == r.instances {
                "skipped"
            } else {
                "pass"
            };
            s += &format!(
                "{:<36} {:>9} {:>6} {:>6} {:>7} {:>15.3e}  {status}\n",
                r.name, r.instances, r.passed, r.failed, r.skipped, r.max_discrepancy
            );
        }
        s
    }
}

pub fn oracle_check(cfg: &RunConfig, broken: bool) -> Result<OracleCheck> {
    let o = &cfg.oracle;
    let budget = o.budget();
    let suites = vec![
        suite_calibration_symmetric(o.instances, &budget, cfg.seed, broken)?,
        suite_joint_symmetric(o.instances, &budget, cfg.seed, broken)?,
        suite_jackknife(o.instances, &budget, cfg.seed, broken)?,
    ];
    let mut files = Files::new();
    if cfg.out.is_some() && cfg.format.json() {
        files.push(("oracle-check.json".into(), json_bytes(&envelope("oracle-check", cfg, &suites))));
    }
    Ok(OracleCheck { suites, files })
}
