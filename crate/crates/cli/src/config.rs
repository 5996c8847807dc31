//! Run configuration: a TOML file whose keys can be overridden by flags.
//!
//! Precedence, highest first: command-line flags, the config file, built-in
//! defaults. A top-level `alpha` replaces every method's own level and the
//! top-level `seed` seeds every method and the simulation study.

use std::path::{Path, PathBuf};

use ecot_core::methods::{MethodName, MethodSpec};
use ecot_core::oracle::OracleBudget;
use ecot_core::sim::ScenarioConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Self::Json | Self::Both)
    }
    pub fn csv(self) -> bool {
        matches!(self, Self::Csv | Self::Both)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Worker threads; 0 uses every available core. Results do not depend on it.
    #[serde(default)]
    pub threads: usize,
    /// Not echoed into reports, so reruns into different directories produce
    /// identical files.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test: Option<TestConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub scenario: ScenarioConfig,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<Grid>,
}

fn default_replicates() -> usize {
    100
}

/// A one-parameter sweep over the scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    pub parameter: GridParameter,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GridParameter {
    /// Labeled sample size `n`, split `n0 : n1 = 4 : 1`.
    N,
    N0,
    N1,
    M,
    A,
    Pi,
    D,
}

impl GridParameter {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::N => "n",
            Self::N0 => "n0",
            Self::N1 => "n1",
            Self::M => "m",
            Self::A => "a",
            Self::Pi => "pi",
            Self::D => "d",
        }
    }

    pub fn apply(self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let count = || -> Result<usize> {
            if value >= 0.0 && value.fract() == 0.0 {
                Ok(value as usize)
            } else {
                Err(CliError::Config(format!("grid value {value} for {} must be a non-negative integer", self.as_str())))
            }
        };
        let mut s = base.clone();
        match self {
            Self::N => {
                let n = count()?;
                s.n1 = (n as f64 / 5.0).round() as usize;
                s.n0 = n - s.n1;
            }
            Self::N0 => s.n0 = count()?,
            Self::N1 => s.n1 = count()?,
            Self::M => s.m = count()?,
            Self::D => s.d = count()?,
            Self::A => s.a = value,
            Self::Pi => s.pi = value,
        }
        Ok(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TestConfig {
    /// CSV with a 0/1 label on every row: `D0` and `D1`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labeled: Option<PathBuf>,
    /// CSV of test points; labels, if present on every row, are used only to
    /// report the false discovery proportion and power.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<PathBuf>,
    #[serde(default = "default_method")]
    pub method: MethodSpec,
}

fn default_method() -> MethodSpec {
    MethodSpec::new(MethodName::EcotBi)
}

impl Default for TestConfig {
    fn default() -> Self {
        Self { labeled: None, data: None, method: default_method() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_instances")]
    pub instances: usize,
    #[serde(default = "default_free")]
    pub max_free_indices: usize,
    #[serde(default = "default_test_points")]
    pub max_test_points: usize,
}

fn default_instances() -> usize {
    100
}
fn default_free() -> usize {
    OracleBudget::default().max_free_indices
}
fn default_test_points() -> usize {
    OracleBudget::default().max_test_points
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { instances: default_instances(), max_free_indices: default_free(), max_test_points: default_test_points() }
    }
}

impl OracleConfig {
    pub fn budget(&self) -> OracleBudget {
        OracleBudget { max_free_indices: self.max_free_indices, max_test_points: self.max_test_points }
    }
}

impl RunConfig {
    /// Parses a config file; relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let resolve = |p: &mut Option<PathBuf>| {
            if let Some(q) = p.as_mut().filter(|q| q.is_relative()) {
                *q = base.join(&*q);
            }
        };
        resolve(&mut cfg.out);
        if let Some(t) = cfg.test.as_mut() {
            resolve(&mut t.labeled);
            resolve(&mut t.data);
        }
        Ok(cfg)
    }

    /// Pushes the top-level `alpha` and `seed` into every method spec.
    pub fn propagate(&mut self) {
        let (alpha, seed) = (self.alpha, self.seed);
        let apply = |s: &mut MethodSpec| {
            if let Some(a) = alpha {
                s.alpha = a;
            }
            s.seed = seed;
        };
        if let Some(sim) = self.simulate.as_mut() {
            sim.methods.iter_mut().for_each(apply);
            sim.scenario.seed = seed;
        }
        if let Some(t) = self.test.as_mut() {
            apply(&mut t.method);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha {
            if !(a > 0.0 && a < 1.0) {
                return Err(CliError::Config(format!("alpha = {a} must lie in (0, 1)")));
            }
        }
        if let Some(sim) = &self.simulate {
            if sim.methods.is_empty() {
                return Err(CliError::Config("simulate.methods is empty".into()));
            }
            if sim.replicates == 0 {
                return Err(CliError::Config("simulate.replicates must be at least 1".into()));
            }
            let points = match &sim.grid {
                Some(g) if g.values.is_empty() => return Err(CliError::Config("simulate.grid.values is empty".into())),
                Some(g) => g.values.iter().map(|&v| g.parameter.apply(&sim.scenario, v)).collect::<Result<Vec<_>>>()?,
                None => vec![sim.scenario.clone()],
            };
            for p in &points {
                p.validate()?;
                for m in &sim.methods {
                    m.validate_sizes(p.n0, p.n1)?;
                }
            }
        }
        if let Some(t) = &self.test {
            if !(t.method.alpha > 0.0 && t.method.alpha < 1.0) {
                return Err(CliError::Config(format!("alpha = {} must lie in (0, 1)", t.method.alpha)));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SIM: &str = r#"
seed = 3
alpha = 0.2
[simulate]
replicates = 5
methods = [{ name = "ecot-bi" }, { name = "cp-bi", alpha = 0.05 }]
[simulate.scenario]
scenario = "mean-shift"
d = 10
a = 1.0
pi = 0.9
n0 = 40
n1 = 10
m = 50
[simulate.grid]
parameter = "n"
values = [100, 250]
"#;

    #[test]
    fn parses_and_propagates() {
        let mut cfg: RunConfig = toml::from_str(SIM).unwrap();
        cfg.propagate();
        cfg.validate().unwrap();
        let sim = cfg.simulate.unwrap();
        assert!(sim.methods.iter().all(|m| m.alpha == 0.2 && m.seed == 3));
        let g = sim.grid.unwrap();
        let s = g.parameter.apply(&sim.scenario, 250.0).unwrap();
        assert_eq!((s.n0, s.n1), (200, 50));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        for bad in ["sed = 1", "[oracle]\nbudget = 3", "[test]\nmethod = { name = \"ecot-bi\", alhpa = 0.1 }"] {
            assert!(toml::from_str::<RunConfig>(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn incompatible_method_is_a_config_error() {
        let text = SIM.replace("n1 = 10", "n1 = 0").replace("[simulate.grid]\nparameter = \"n\"\nvalues = [100, 250]", "");
        let mut cfg: RunConfig = toml::from_str(&text).unwrap();
        cfg.propagate();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn fractional_counts_are_rejected() {
        let cfg: RunConfig = toml::from_str(SIM).unwrap();
        assert!(GridParameter::M.apply(&cfg.simulate.unwrap().scenario, 10.5).is_err());
    }
}
