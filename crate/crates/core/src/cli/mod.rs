//! Experiment runner behind the `kwlab` binary.
//!
//! A run reads an [`ExperimentConfig`], writes every artifact under
//! `config.out` (always including `config.txt`, the effective configuration,
//! and `summary.json`) and returns an [`Outcome`] whose summary the binary
//! prints as a single JSON line.

mod config;
mod fields;
mod modes;
mod selftest;

use std::fs;
use std::path::Path;

use serde_json::{json, Value};

use crate::error::{Error, Result};

pub use config::{Control, Engine, ExperimentConfig, FieldKind, FieldSpec, Mode, RawConfig, StartKind, KEYS};
pub use fields::{named_field, random_field};
pub use selftest::{run_selftest, SelftestCheck};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_VERDICT: i32 = 2;

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub exit_code: i32,
    pub summary: Value,
}

impl Outcome {
    pub(crate) fn new(pass: bool, summary: Value) -> Self {
        Outcome {
            exit_code: if pass { EXIT_OK } else { EXIT_VERDICT },
            summary,
        }
    }
}

/// Runs one experiment. `single_thread` runs everything on one worker.
pub fn run(cfg: &ExperimentConfig) -> Result<Outcome> {
    fs::create_dir_all(&cfg.out).map_err(|e| Error::io(&cfg.out, e))?;
    write_text(&cfg.out.join("config.txt"), &cfg.dump())?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(if cfg.single_thread { 1 } else { 0 })
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    let mut outcome = pool.install(|| match cfg.mode {
        Mode::Solve => modes::solve(cfg),
        Mode::Threshold => modes::threshold(cfg),
        Mode::DingLiu => modes::dingliu(cfg),
        Mode::Family => modes::family(cfg),
        Mode::Diagnose => modes::diagnose(cfg),
        Mode::Selftest => selftest::selftest(cfg),
    })?;
    if let Value::Object(map) = &mut outcome.summary {
        map.insert("mode".into(), json!(cfg.mode.as_str()));
        map.insert("exit_code".into(), json!(outcome.exit_code));
    }
    write_text(&cfg.out.join("summary.json"), &serde_json::to_string_pretty(&outcome.summary)?)?;
    Ok(outcome)
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
