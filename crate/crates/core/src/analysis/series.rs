use std::io::{Read, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::barenblatt::BarenblattProfile;
use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::functionals::FunctionalSample;
use crate::solver::{Equilibrium, RadialGrid, TimeScheme};

/// Fixed CSV schema of the time series.
pub const CSV_COLUMNS: [&str; 13] = [
    "tau",
    "mass",
    "E_rel",
    "I_rel",
    "E_lin",
    "I_lin",
    "I0_lin",
    "I_eps",
    "I_gamma_eps",
    "L1_dist",
    "w_min",
    "w_max",
    "clipped_mass",
];

/// One sampled instant of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub tau: f64,
    pub mass: f64,
    pub functionals: FunctionalSample,
    /// Fisher information with the unregularized mobility, when the run
    /// used `eps_reg > 0` (otherwise `functionals.i_rel` is already exact).
    pub i_rel_exact: Option<f64>,
    pub l1_dist: f64,
    pub w_min: f64,
    pub w_max: f64,
    pub clipped_mass: f64,
    /// `max Phi_eps` for each entry of `SeriesMeta::eps_sweep`.
    pub phi_eps: Vec<f64>,
    /// `max_{r>1} r |d_r w| / w`.
    pub grad_quotient: f64,
    pub step_count: usize,
}

impl Sample {
    pub fn csv_row(&self) -> [f64; 13] {
        let f = &self.functionals;
        [
            self.tau,
            self.mass,
            f.e_rel,
            f.i_rel,
            f.e_lin,
            f.i_lin,
            f.i0_lin,
            f.i_eps,
            f.i_gamma_eps,
            self.l1_dist,
            self.w_min,
            self.w_max,
            self.clipped_mass,
        ]
    }

    pub fn i_rel_exact(&self) -> f64 {
        self.i_rel_exact.unwrap_or(self.functionals.i_rel)
    }

    fn is_finite(&self) -> bool {
        self.csv_row().iter().all(|v| v.is_finite())
            && self.phi_eps.iter().all(|v| v.is_finite())
            && self.grad_quotient.is_finite()
            && self.i_rel_exact().is_finite()
    }
}

/// Everything needed to rebuild the run's grid and equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub config_hash: String,
    pub seed: u64,
    pub m: f64,
    pub p: f64,
    pub n: usize,
    pub r_max: f64,
    pub cells: usize,
    pub stretch: f64,
    pub d0: f64,
    pub d1: f64,
    /// Mass-matched parameter on the grid.
    pub dstar: f64,
    /// Mass-matched parameter of the continuum profile.
    pub dstar_continuum: f64,
    pub w0: f64,
    pub w1: f64,
    /// Regularization of the sampled linear functionals.
    pub eps: f64,
    pub eps_reg: f64,
    /// First entry equals `eps`.
    pub eps_sweep: Vec<f64>,
    pub scheme: TimeScheme,
    pub safety: f64,
    pub cadence: f64,
    pub tau_end: f64,
}

impl SeriesMeta {
    pub fn exponents(&self) -> Result<Exponents> {
        Exponents::derive(self.m, self.p, self.n)
    }

    pub fn grid(&self) -> Result<RadialGrid> {
        RadialGrid::new(self.n, self.r_max, self.cells, self.stretch)
    }

    pub fn equilibrium(&self) -> Result<Equilibrium> {
        let profile = BarenblattProfile::new(self.exponents()?, self.dstar)?;
        Equilibrium::new(profile, Arc::new(self.grid()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsSeries {
    pub meta: SeriesMeta,
    pub samples: Vec<Sample>,
}

impl DiagnosticsSeries {
    pub fn new(meta: SeriesMeta) -> Self {
        DiagnosticsSeries {
            meta,
            samples: Vec::new(),
        }
    }

    /// Append a sample; `tau` must increase strictly and all entries be finite.
    pub fn push(&mut self, s: Sample) -> Result<()> {
        if !s.is_finite() {
            return Err(Error::NonFinite {
                context: "diagnostics sample",
                tau: s.tau,
            });
        }
        if let Some(last) = self.samples.last() {
            if !(s.tau > last.tau) {
                return Err(Error::Domain {
                    op: "series push",
                    detail: format!("tau {} does not follow {}", s.tau, last.tau),
                });
            }
        }
        self.samples.push(s);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn taus(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.tau).collect()
    }

    /// Values of a named column: any CSV column, or `phi_eps_max`,
    /// `grad_quotient`, `ck_ratio` (NaN where undefined), `step_count`.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        if let Some(k) = CSV_COLUMNS.iter().position(|c| *c == name) {
            return Ok(self.samples.iter().map(|s| s.csv_row()[k]).collect());
        }
        let f: fn(&Sample) -> f64 = match name {
            "phi_eps_max" => |s| s.phi_eps.first().copied().unwrap_or(f64::NAN),
            "grad_quotient" => |s| s.grad_quotient,
            "ck_ratio" => |s| s.functionals.ck_ratio.unwrap_or(f64::NAN),
            "step_count" => |s| s.step_count as f64,
            _ => {
                return Err(Error::Domain {
                    op: "column",
                    detail: format!("unknown column `{name}`"),
                })
            }
        };
        Ok(self.samples.iter().map(f).collect())
    }

    /// Samples with `tau_a <= tau <= tau_b`.
    pub fn window(&self, tau_a: f64, tau_b: f64) -> &[Sample] {
        let a = self.samples.partition_point(|s| s.tau < tau_a);
        let b = self.samples.partition_point(|s| s.tau <= tau_b);
        &self.samples[a..b.max(a)]
    }

    /// Write the fixed-schema CSV, floats with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::Parse {
            what: "CSV output",
            detail: e.to_string(),
        };
        w.write_record(CSV_COLUMNS).map_err(io)?;
        for s in &self.samples {
            w.write_record(s.csv_row().iter().map(|v| format!("{v:.16e}")))
                .map_err(io)?;
        }
        w.flush().map_err(|e| Error::Parse {
            what: "CSV output",
            detail: e.to_string(),
        })
    }
}

/// Parse a CSV written by `write_csv` into rows of the fixed schema.
pub fn read_csv<R: Read>(input: R) -> Result<Vec<[f64; 13]>> {
    let mut r = csv::Reader::from_reader(input);
    let err = |detail: String| Error::Parse {
        what: "series CSV",
        detail,
    };
    let header = r.headers().map_err(|e| err(e.to_string()))?.clone();
    if header.iter().ne(CSV_COLUMNS.iter().copied()) {
        return Err(err(format!(
            "unexpected header {:?}",
            header.iter().collect::<Vec<_>>()
        )));
    }
    let mut rows = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let mut row = [0.0; 13];
        for (k, field) in rec.iter().enumerate() {
            row[k] = field.trim().parse().map_err(|_| {
                err(format!(
                    "row {}: `{field}` in column {}",
                    line + 1,
                    CSV_COLUMNS[k]
                ))
            })?;
        }
        rows.push(row);
    }
    Ok(rows)
}
