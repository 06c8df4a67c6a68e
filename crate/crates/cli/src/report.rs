use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use dnl_core::analysis::{Check, RateFit};
use dnl_core::exponents::Exponents;

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: u64,
    pub command: String,
    pub version: String,
}

impl Provenance {
    pub fn new(cfg: &RunConfig, command: &str) -> Self {
        Provenance {
            config_hash: cfg.hash(),
            seed: cfg.seed,
            command: command.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckEntry {
    pub name: String,
    pub pass: bool,
    pub slack: f64,
}

impl From<&Check> for CheckEntry {
    fn from(c: &Check) -> Self {
        CheckEntry {
            name: c.name.clone(),
            pass: c.pass,
            slack: c.slack,
        }
    }
}

/// Common JSON layout of every report: `constants`, `fits`, `checks`,
/// `provenance`, plus command-specific extra keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub exponents: Exponents,
    pub constants: Map<String, Value>,
    pub fits: Vec<RateFit>,
    pub checks: Vec<CheckEntry>,
    pub provenance: Provenance,
    #[serde(flatten)]
    pub extra: Map<String, Value>,
}

impl Report {
    pub fn new(cfg: &RunConfig, command: &str, exponents: Exponents) -> Self {
        Report {
            exponents,
            constants: Map::new(),
            fits: Vec::new(),
            checks: Vec::new(),
            provenance: Provenance::new(cfg, command),
            extra: Map::new(),
        }
    }

    pub fn constant<T: Serialize>(&mut self, key: &str, v: T) -> &mut Self {
        self.constants.insert(key.to_string(), to_value(v));
        self
    }

    pub fn extra<T: Serialize>(&mut self, key: &str, v: T) -> &mut Self {
        self.extra.insert(key.to_string(), to_value(v));
        self
    }

    pub fn check(&mut self, c: &Check) -> &mut Self {
        self.checks.push(c.into());
        self
    }

    pub fn failed(&self) -> Vec<String> {
        self.checks
            .iter()
            .filter(|c| !c.pass)
            .map(|c| c.name.clone())
            .collect()
    }

    /// Write to `path`; a failing check turns into a verification error.
    pub fn finish(&self, path: &Path) -> Result<(), CliError> {
        write_json(path, self)?;
        let failed = self.failed();
        if failed.is_empty() {
            Ok(())
        } else {
            Err(CliError::Verification { failed })
        }
    }
}

fn to_value<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("report values serialize")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let io = |e: std::io::Error| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let f = File::open(path).map_err(|e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    serde_json::from_reader(BufReader::new(f)).map_err(|e| CliError::Artifact {
        path: path.to_path_buf(),
        detail: e.to_string(),
    })
}
