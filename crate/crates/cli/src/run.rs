use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use lexicon_core::{LexiconError, Result};
use serde::Serialize;
use serde_json::Value;

pub const RUN_METADATA: &str = "run.json";

/// Process-wide facts recorded in every run's metadata.
pub struct Context {
    argv: Vec<String>,
    started: Instant,
}

#[derive(Serialize)]
struct RunMetadata<'a> {
    tool: &'static str,
    version: &'static str,
    core_version: &'static str,
    os: &'static str,
    arch: &'static str,
    argv: &'a [String],
    workers: usize,
    command: &'a str,
    config: Value,
    timings: Value,
    wall_clock_s: f64,
}

impl Context {
    pub fn new(argv: Vec<String>) -> Self {
        Self {
            argv,
            started: Instant::now(),
        }
    }

    /// Writes `run.json` into `dir`: the resolved config, versions, timings.
    pub fn write_metadata(&self, dir: &Path, command: &str, config: Value, timings: Value) -> Result<()> {
        let meta = RunMetadata {
            tool: "lexicon",
            version: env!("CARGO_PKG_VERSION"),
            core_version: lexicon_core::VERSION,
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            argv: &self.argv,
            workers: rayon::current_num_threads(),
            command,
            config,
            timings,
            wall_clock_s: self.started.elapsed().as_secs_f64(),
        };
        lexicon_core::io::write_json(&meta, dir.join(RUN_METADATA))
    }
}

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| LexiconError::io(dir, e))
}

/// `dir/name` when that subdirectory exists, else `dir` itself.
pub fn subdir_or_self(dir: &Path, name: &str) -> PathBuf {
    let nested = dir.join(name);
    if nested.is_dir() {
        nested
    } else {
        dir.to_path_buf()
    }
}

/// `path/name` when `path` is a directory, else `path`.
pub fn file_in(path: &Path, name: &str) -> PathBuf {
    if path.is_dir() {
        path.join(name)
    } else {
        path.to_path_buf()
    }
}

pub fn to_value<T: Serialize>(v: &T) -> Result<Value> {
    Ok(serde_json::to_value(v)?)
}
