use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use dnl_core::solver::{Shape, SimulationConfig, TimeScheme};

use crate::error::CliError;

/// Keys that must be present in every config file.
pub const REQUIRED_KEYS: [&str; 14] = [
    "m",
    "p",
    "n",
    "grid.r_max",
    "grid.cells",
    "grid.stretch",
    "time.tau_end",
    "time.safety",
    "init.D0",
    "init.D1",
    "init.shape",
    "reg.eps",
    "output.cadence",
    "output.path",
];

/// Environment variable prefixed to `output.path`.
pub const OUTPUT_DIR_ENV: &str = "DNL_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub m: f64,
    pub p: f64,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridBlock,
    pub time: TimeBlock,
    pub init: InitBlock,
    pub reg: RegBlock,
    #[serde(default)]
    pub spectral: SpectralBlock,
    pub output: OutputBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridBlock {
    pub r_max: f64,
    pub cells: usize,
    pub stretch: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeBlock {
    pub tau_end: f64,
    pub safety: f64,
    #[serde(default = "implicit")]
    pub scheme: TimeScheme,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strict_tol: Option<f64>,
}

fn implicit() -> TimeScheme {
    TimeScheme::Implicit
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShapeKind {
    Equilibrium,
    Step,
    Bump,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitBlock {
    #[serde(rename = "D0")]
    pub d0: f64,
    #[serde(rename = "D1")]
    pub d1: f64,
    pub shape: ShapeKind,
    /// Step radius or bump center.
    #[serde(default = "one")]
    pub radius: f64,
    #[serde(default = "width")]
    pub width: f64,
}

fn one() -> f64 {
    1.0
}

fn width() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegBlock {
    pub eps: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps_reg: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub eps_sweep: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralBlock {
    #[serde(default = "ell_max")]
    pub ell_max: usize,
    /// Defaults to `reg.eps`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
}

fn ell_max() -> usize {
    4
}

impl Default for SpectralBlock {
    fn default() -> Self {
        SpectralBlock {
            ell_max: ell_max(),
            eps: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    pub path: String,
    pub cadence: f64,
    /// Defaults to `tau_end / 10`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshot_interval: Option<f64>,
}

fn lookup<'a>(table: &'a toml::Table, dotted: &str) -> Option<&'a toml::Value> {
    let mut parts = dotted.split('.');
    let mut cur = table.get(parts.next()?)?;
    for k in parts {
        cur = cur.as_table()?.get(k)?;
    }
    Some(cur)
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| CliError::Config {
                key: None,
                detail: e.message().to_string(),
            })?;
        if let Some(key) = REQUIRED_KEYS.iter().find(|k| lookup(&table, k).is_none()) {
            return Err(CliError::Config {
                key: Some(key.to_string()),
                detail: "missing required key".into(),
            });
        }
        let cfg: RunConfig =
            toml::Value::Table(table)
                .try_into()
                .map_err(|e: toml::de::Error| CliError::Config {
                    key: None,
                    detail: e.message().to_string(),
                })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Canonical TOML form; parsing it gives back an equal config.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the canonical form, so comments and key order do not matter.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.simulation()?.validate()?;
        let pos = |key: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(CliError::Config {
                    key: Some(key.to_string()),
                    detail: format!("must be positive and finite, got {v}"),
                })
            }
        };
        pos("init.width", self.init.width)?;
        pos("init.radius", self.init.radius)?;
        if let Some(e) = self.spectral.eps {
            if !(e >= 0.0) {
                return Err(CliError::Config {
                    key: Some("spectral.eps".into()),
                    detail: format!("must be >= 0, got {e}"),
                });
            }
        }
        Ok(())
    }

    pub fn shape(&self) -> Shape {
        let (radius, width) = (self.init.radius, self.init.width);
        match self.init.shape {
            ShapeKind::Equilibrium => Shape::Equilibrium,
            ShapeKind::Step => Shape::Step { radius, width },
            ShapeKind::Bump => Shape::Bump {
                center: radius,
                width,
            },
        }
    }

    pub fn simulation(&self) -> Result<SimulationConfig, CliError> {
        Ok(SimulationConfig {
            m: self.m,
            p: self.p,
            n: self.n,
            r_max: self.grid.r_max,
            cells: self.grid.cells,
            stretch: self.grid.stretch,
            tau_end: self.time.tau_end,
            safety: self.time.safety,
            scheme: self.time.scheme,
            d0: self.init.d0,
            d1: self.init.d1,
            shape: self.shape(),
            eps: self.reg.eps,
            eps_reg: self.reg.eps_reg,
            eps_sweep: self.reg.eps_sweep.clone(),
            cadence: self.output.cadence,
            snapshot_interval: Some(
                self.output
                    .snapshot_interval
                    .unwrap_or(self.time.tau_end / 10.0),
            ),
            strict_tol: self.time.strict_tol,
            config_hash: self.hash(),
            seed: self.seed,
        })
    }

    /// Regularization of the spectral problem: `spectral.eps`, else `reg.eps`; 0 for `p >= 2`.
    pub fn spectral_eps(&self) -> f64 {
        if self.p >= 2.0 {
            0.0
        } else {
            self.spectral.eps.unwrap_or(self.reg.eps)
        }
    }

    /// `output.path`, prefixed by `$DNL_OUTPUT_DIR` when set.
    pub fn output_dir(&self) -> PathBuf {
        let own = Path::new(&self.output.path);
        match std::env::var_os(OUTPUT_DIR_ENV) {
            Some(root) if !root.is_empty() => {
                let rel = own.strip_prefix("/").unwrap_or(own);
                PathBuf::from(root).join(rel)
            }
            _ => own.to_path_buf(),
        }
    }
}
