//! Report files. Every file is written to a temporary sibling and renamed
//! into place, and nothing is written until the whole command has succeeded.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Wraps command results with the schema version, tool version and the
/// effective configuration.
pub fn envelope(command: &str, config: &RunConfig, results: impl Serialize) -> Value {
    json!({
        "schema_version": SCHEMA_VERSION,
        "tool": "ecot",
        "tool_version": TOOL_VERSION,
        "command": command,
        "seed": config.seed,
        "config": config,
        "results": results,
    })
}

/// A comment line carrying the same provenance for CSV reports.
pub fn csv_preamble(command: &str, config: &RunConfig) -> String {
    let cfg = serde_json::to_string(config).expect("config serializes");
    format!("# ecot {TOOL_VERSION} schema {SCHEMA_VERSION} command {command} seed {} config {cfg}\n", config.seed)
}

pub fn json_bytes(v: &Value) -> Vec<u8> {
    let mut b = serde_json::to_vec_pretty(v).expect("json serializes");
    b.push(b'\n');
    b
}

pub fn csv_bytes<R: AsRef<[String]>>(preamble: &str, header: &[&str], rows: &[R]) -> Result<Vec<u8>> {
    let mut buf = preamble.as_bytes().to_vec();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let err = |e: csv::Error| CliError::Config(e.to_string());
        w.write_record(header).map_err(err)?;
        for r in rows {
            w.write_record(r.as_ref()).map_err(err)?;
        }
        w.flush().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(buf)
}

/// Writes every `(name, bytes)` pair into `dir` atomically.
pub fn write_all(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut written = Vec::with_capacity(files.len());
    for (name, bytes) in files {
        let target = dir.join(name);
        let tmp = dir.join(format!(".{name}.tmp"));
        let result = (|| {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(bytes)?;
            f.sync_all()?;
            std::fs::rename(&tmp, &target)
        })();
        if let Err(e) = result {
            let _ = std::fs::remove_file(&tmp);
            return Err(CliError::io(&target, e));
        }
        written.push(target);
    }
    Ok(written)
}
