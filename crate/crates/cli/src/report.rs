//! CSV and JSON emission. Floats carry 17 significant digits so reruns diff cleanly.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rows accumulated in memory and written in one go.
pub struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let io = |e: csv::Error| CliError::Output {
            path: path.to_path_buf(),
            source: e.into(),
        };
        let mut w = csv::Writer::from_path(path).map_err(io)?;
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Output {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Output {
        path: path.to_path_buf(),
        source,
    })
}

/// Wall-clock phases of a run.
pub struct Timer {
    start: Instant,
    last: Instant,
    phases: Vec<(String, f64)>,
}

impl Timer {
    pub fn start() -> Self {
        let now = Instant::now();
        Timer {
            start: now,
            last: now,
            phases: Vec::new(),
        }
    }

    pub fn lap(&mut self, phase: &str) {
        let now = Instant::now();
        self.phases.push((phase.to_string(), (now - self.last).as_secs_f64()));
        self.last = now;
    }

    fn to_json(&self) -> Value {
        let mut map = serde_json::Map::new();
        for (phase, secs) in &self.phases {
            map.insert(phase.clone(), Value::from(*secs));
        }
        map.insert("total".into(), Value::from(self.start.elapsed().as_secs_f64()));
        Value::Object(map)
    }
}

/// Output directory of one command run.
pub struct OutputDir {
    root: PathBuf,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<Self> {
        std::fs::create_dir_all(root).map_err(|source| CliError::Output {
            path: root.to_path_buf(),
            source,
        })?;
        Ok(OutputDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.root.join(name)
    }

    /// `run.json`: config echo, versions and timings. The only non-deterministic file.
    pub fn write_metadata(&self, command: &str, config: &RunConfig, timer: &Timer, files: &[&str]) -> CliResult<()> {
        let meta = serde_json::json!({
            "command": command,
            "config": config,
            "versions": {
                "dirac-cli": env!("CARGO_PKG_VERSION"),
                "dirac-core": dirac_core::VERSION,
            },
            "outputs": files,
            "timings_seconds": timer.to_json(),
        });
        write_json(&self.path("run.json"), &meta)
    }
}
