//! Synthetic scenarios and the Monte Carlo FDR/power harness.
//!
//! Replicate `r` of a study with base seed `s` draws its data with scenario
//! seed `derive_seed(s, 2r)` and runs methods with seed `derive_seed(s, 2r+1)`.
//! Replicates run in parallel and are folded in replicate order, so reports
//! are bit-identical across runs and thread counts.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{EcotError, Result};
use crate::methods::{run, MethodSpec};
use crate::problem::{fdp_and_power, FeatureMatrix, MonteCarloReport, TestingProblem};
use crate::rng::{derive_seed, stream, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    /// `X | Y=0 ~ N(0, I_d)`, `X | Y=1 ~ N(μ, I_d)` with the first five
    /// coordinates of `μ` equal to `sqrt(a·ln d)`.
    MeanShift,
    /// `X = sqrt(1 + a·1{Y=1})·V + W`, `V ~ N(0, I_d)`, `W` drawn uniformly from
    /// `d` anchor points sampled from `U[−3, 3]^d`.
    VarianceShift,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub scenario: Scenario,
    pub d: usize,
    pub a: f64,
    /// Null proportion of the test set.
    pub pi: f64,
    pub n0: usize,
    pub n1: usize,
    pub m: usize,
    #[serde(default)]
    pub seed: u64,
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.a.is_finite()) {
            return Err(EcotError::Parameter(format!("signal strength a = {} must be non-negative", self.a)));
        }
        if !(0.0..=1.0).contains(&self.pi) {
            return Err(EcotError::Parameter(format!("null proportion {} must lie in [0, 1]", self.pi)));
        }
        if self.d == 0 || self.n0 == 0 || self.m == 0 {
            return Err(EcotError::Parameter("d, n0 and m must be positive".into()));
        }
        if self.scenario == Scenario::MeanShift && self.d < 5 {
            return Err(EcotError::Parameter(format!("mean-shift scenario needs d ≥ 5, got {}", self.d)));
        }
        Ok(())
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self { seed, ..self.clone() }
    }

    /// `round((1−π)m)`.
    pub fn nonnull_count(&self) -> usize {
        ((1.0 - self.pi) * self.m as f64).round() as usize
    }

    /// Mean vector of the mean-shift non-null distribution.
    pub fn mean_vector(&self) -> Vec<f64> {
        let amp = (self.a * (self.d as f64).ln()).sqrt();
        (0..self.d).map(|i| if i < 5 { amp } else { 0.0 }).collect()
    }
}

/// A generated problem with the true test labels (`true` = non-null).
#[derive(Debug, Clone)]
pub struct Generated {
    pub problem: TestingProblem,
    pub labels: Vec<bool>,
}

struct Sampler {
    rng: ChaCha20Rng,
    d: usize,
    kind: Kind,
}

enum Kind {
    Mean(Vec<f64>),
    Variance { a: f64, anchors: Vec<Vec<f64>> },
}

impl Sampler {
    fn new(config: &ScenarioConfig) -> Self {
        let kind = match config.scenario {
            Scenario::MeanShift => Kind::Mean(config.mean_vector()),
            Scenario::VarianceShift => {
                let mut arng = stream(config.seed, Stream::Anchors);
                let anchors = (0..config.d)
                    .map(|_| (0..config.d).map(|_| arng.random_range(-3.0..3.0)).collect())
                    .collect();
                Kind::Variance { a: config.a, anchors }
            }
        };
        Self { rng: stream(config.seed, Stream::Data), d: config.d, kind }
    }

    fn draw(&mut self, nonnull: bool, out: &mut Vec<f64>) {
        match &self.kind {
            Kind::Mean(mu) => {
                for &m in mu {
                    let z: f64 = self.rng.sample(StandardNormal);
                    out.push(if nonnull { z + m } else { z });
                }
            }
            Kind::Variance { a, anchors } => {
                let w = &anchors[self.rng.random_range(0..anchors.len())];
                let scale = if nonnull { (1.0 + a).sqrt() } else { 1.0 };
                for &wi in w.iter().take(self.d) {
                    let z: f64 = self.rng.sample(StandardNormal);
                    out.push(scale * z + wi);
                }
            }
        }
    }

    fn matrix(&mut self, labels: impl Iterator<Item = bool>) -> Result<FeatureMatrix> {
        let mut data = Vec::new();
        for l in labels {
            self.draw(l, &mut data);
        }
        FeatureMatrix::new(data, self.d)
    }
}

/// Draws `D0`, `D1` and `Du` for the configured scenario. The test set holds
/// exactly `round((1−π)m)` non-nulls at shuffled positions.
pub fn generate(config: &ScenarioConfig) -> Result<Generated> {
    config.validate()?;
    let mut s = Sampler::new(config);
    let null = s.matrix(std::iter::repeat_n(false, config.n0))?;
    let nonnull = s.matrix(std::iter::repeat_n(true, config.n1))?;
    let k = config.nonnull_count();
    let mut labels: Vec<bool> = (0..config.m).map(|i| i < k).collect();
    labels.shuffle(&mut s.rng);
    let test = s.matrix(labels.iter().copied())?;
    Ok(Generated { problem: TestingProblem::new(null, nonnull, test)?, labels })
}

pub fn generate_mean_shift(config: &ScenarioConfig) -> Result<Generated> {
    if config.scenario != Scenario::MeanShift {
        return Err(EcotError::Config("not a mean-shift configuration".into()));
    }
    generate(config)
}

pub fn generate_variance_shift(config: &ScenarioConfig) -> Result<Generated> {
    if config.scenario != Scenario::VarianceShift {
        return Err(EcotError::Config("not a variance-shift configuration".into()));
    }
    generate(config)
}

/// Seeds of replicate `r`: `(scenario seed, method seed)`.
pub fn replicate_seeds(seed: u64, r: usize) -> (u64, u64) {
    (derive_seed(seed, 2 * r as u64), derive_seed(seed, 2 * r as u64 + 1))
}

/// Runs `f(scenario_seed, method_seed)` for every replicate in parallel and
/// returns the results in replicate order.
pub fn replicate<T, F>(replicates: usize, seed: u64, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64, u64) -> Result<T> + Sync,
{
    if replicates == 0 {
        return Err(EcotError::Parameter("at least one replicate is required".into()));
    }
    (0..replicates)
        .into_par_iter()
        .map(|r| {
            let (s, m) = replicate_seeds(seed, r);
            f(s, m)
        })
        .collect()
}

/// Monte Carlo FDR and power of one method.
pub fn monte_carlo(spec: &MethodSpec, scenario: &ScenarioConfig, replicates: usize, seed: u64) -> Result<MonteCarloReport> {
    Ok(monte_carlo_paired(std::slice::from_ref(spec), scenario, replicates, seed)?.remove(0))
}

/// Monte Carlo for several methods run on the same replicate data sets.
pub fn monte_carlo_paired(
    specs: &[MethodSpec],
    scenario: &ScenarioConfig,
    replicates: usize,
    seed: u64,
) -> Result<Vec<MonteCarloReport>> {
    scenario.validate()?;
    for spec in specs {
        spec.validate_sizes(scenario.n0, scenario.n1)?;
    }
    let rows = replicate(replicates, seed, |s_seed, m_seed| {
        let g = generate(&scenario.with_seed(s_seed))?;
        specs
            .iter()
            .map(|spec| {
                let out = run(&g.problem, &spec.clone().with_seed(m_seed))?;
                fdp_and_power(&out.report.rejected, g.problem.test_indices(), &g.labels)
            })
            .collect::<Result<Vec<_>>>()
    })?;
    (0..specs.len())
        .map(|k| MonteCarloReport::from_replicates(rows.iter().map(|r| r[k]).collect()))
        .collect()
}

/// `sqrt(se_a² + se_b²)`.
pub fn joint_se(a: f64, b: f64) -> f64 {
    (a * a + b * b).sqrt()
}
