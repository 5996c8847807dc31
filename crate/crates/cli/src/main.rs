mod commands;
mod config;
mod data;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ecot_core::methods::MethodName;

use crate::config::{Format, RunConfig, TestConfig};
use crate::error::{CliError, Result};

/// Conformal multiple testing with full data efficiency.
#[derive(Debug, Parser)]
#[command(name = "ecot", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Shared {
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Target FDR level; overrides every method's level.
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Worker threads (0 = all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monte Carlo FDR and power on a synthetic scenario.
    Simulate {
        #[arg(long)]
        replicates: Option<usize>,
        /// Also write the first replicate's data as data-labeled.csv and data-test.csv.
        #[arg(long)]
        export_data: bool,
    },
    /// Test the points of a CSV file against labeled CSV data.
    Test {
        /// CSV with features f1..fd and a 0/1 label column.
        #[arg(long)]
        labeled: Option<PathBuf>,
        /// CSV of test points.
        #[arg(long = "data")]
        data: Option<PathBuf>,
        #[arg(long, value_parser = parse_method)]
        method: Option<MethodName>,
    },
    /// Check the fast p-value paths against brute-force enumeration.
    OracleCheck {
        #[arg(long)]
        instances: Option<usize>,
        #[arg(long)]
        max_free_indices: Option<usize>,
        /// Swap in an order-dependent score to exercise the failure path.
        #[arg(long, hide = true)]
        inject_broken_scorer: bool,
    },
}

fn parse_method(s: &str) -> std::result::Result<MethodName, String> {
    serde_json::from_value(serde_json::Value::String(s.into())).map_err(|_| format!("unknown method {s:?}"))
}

fn effective_config(cli: &Cli) -> Result<RunConfig> {
    let s = &cli.shared;
    let mut cfg = match &s.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(v) = s.seed {
        cfg.seed = v;
    }
    if let Some(v) = s.alpha {
        cfg.alpha = Some(v);
    }
    if let Some(v) = s.threads {
        cfg.threads = v;
    }
    if let Some(v) = &s.out {
        cfg.out = Some(v.clone());
    }
    if let Some(v) = s.format {
        cfg.format = v;
    }
    match &cli.command {
        Command::Simulate { replicates, .. } => {
            let sim = cfg.simulate.as_mut().ok_or_else(|| CliError::Config("missing [simulate] section".into()))?;
            if let Some(r) = replicates {
                sim.replicates = *r;
            }
        }
        Command::Test { labeled, data, method } => {
            let t = cfg.test.get_or_insert_with(TestConfig::default);
            if labeled.is_some() {
                t.labeled.clone_from(labeled);
            }
            if data.is_some() {
                t.data.clone_from(data);
            }
            if let Some(m) = method {
                t.method.name = *m;
            }
        }
        Command::OracleCheck { instances, max_free_indices, .. } => {
            if let Some(v) = instances {
                cfg.oracle.instances = *v;
            }
            if let Some(v) = max_free_indices {
                cfg.oracle.max_free_indices = *v;
            }
        }
    }
    cfg.propagate();
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> Result<bool> {
    let cfg = effective_config(cli)?;
    if cfg.threads > 0 {
        // fails only if a pool already exists, which cannot happen here
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cfg.threads).build_global();
    }
    let out_dir = || cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    let (files, ok) = match &cli.command {
        Command::Simulate { export_data, .. } => {
            let mut files = commands::simulate(&cfg)?;
            if *export_data {
                files.extend(commands::export_data(&cfg)?);
            }
            (files, true)
        }
        Command::Test { .. } => (commands::test(&cfg)?, true),
        Command::OracleCheck { inject_broken_scorer, .. } => {
            let check = commands::oracle_check(&cfg, *inject_broken_scorer)?;
            print!("{}", check.table());
            let ok = check.passed();
            (check.files, ok)
        }
    };
    for path in output::write_all(&out_dir(), &files)? {
        eprintln!("wrote {}", path.display());
    }
    Ok(ok)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
