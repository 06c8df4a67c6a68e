use std::sync::Arc;

use crate::analysis::{DiagnosticsSeries, Sample, SeriesMeta};
use crate::barenblatt::solve_dstar;
use crate::error::{Error, Result};
use crate::exponents::{Exponents, RangeClass};
use crate::functionals::{fisher_information, gradient_quotient_max, phi_eps_max, sample};
use crate::solver::equilibrium::Equilibrium;
use crate::solver::grid::RadialGrid;
use crate::solver::init::{build_initial_data, InitialData, Shape};
use crate::solver::scheme::{Mobility, Scheme};
use crate::solver::stepper::{SandwichGuard, StepPolicy, Stepper, TimeScheme, TimeState};

/// Everything `simulate` needs. The functional regularization `eps` is
/// forced to 0 for `p >= 2`, where the plain weights are regular.
#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub m: f64,
    pub p: f64,
    pub n: usize,
    pub r_max: f64,
    pub cells: usize,
    pub stretch: f64,
    pub tau_end: f64,
    pub safety: f64,
    pub scheme: TimeScheme,
    pub d0: f64,
    pub d1: f64,
    pub shape: Shape,
    pub eps: f64,
    /// Mobility regularization; `None` means `h_min` for `p < 2` and 0 otherwise.
    pub eps_reg: Option<f64>,
    /// Extra regularizations for which `max Phi_eps` is recorded.
    pub eps_sweep: Vec<f64>,
    pub cadence: f64,
    pub snapshot_interval: Option<f64>,
    /// Abort once `w` leaves `[W0 - tol, W1 + tol]`.
    pub strict_tol: Option<f64>,
    pub config_hash: String,
    pub seed: u64,
}

impl SimulationConfig {
    pub fn validate(&self) -> Result<Exponents> {
        let e = Exponents::derive(self.m, self.p, self.n)?;
        if e.classify() != RangeClass::InRange {
            return Err(Error::InvalidParameter {
                name: "m",
                value: self.m,
                reason: "outside (m_c, (n-p+1)/(n(p-1)))",
            });
        }
        let pos = |name: &'static str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter {
                    name,
                    value: v,
                    reason: "must be positive and finite",
                })
            }
        };
        pos("grid.r_max", self.r_max)?;
        pos("time.tau_end", self.tau_end)?;
        pos("time.safety", self.safety)?;
        pos("output.cadence", self.cadence)?;
        pos("init.D1", self.d1)?;
        if self.cells < 16 {
            return Err(Error::InvalidParameter {
                name: "grid.cells",
                value: self.cells as f64,
                reason: "must be >= 16",
            });
        }
        if !(self.stretch >= 1.0) {
            return Err(Error::InvalidParameter {
                name: "grid.stretch",
                value: self.stretch,
                reason: "must be >= 1",
            });
        }
        if !(self.d0 >= self.d1) {
            return Err(Error::SandwichOrdering {
                d0: self.d0,
                dstar: f64::NAN,
                d1: self.d1,
            });
        }
        if let Some(r) = self.eps_reg.filter(|r| !(*r >= 0.0)) {
            return Err(Error::InvalidParameter {
                name: "reg.eps_reg",
                value: r,
                reason: "must be >= 0",
            });
        }
        if e.p < 2.0 {
            for &x in std::iter::once(&self.eps).chain(&self.eps_sweep) {
                pos("reg.eps", x)?;
            }
        }
        if let Some(s) = self.snapshot_interval {
            pos("output.snapshot_interval", s)?;
        }
        if let Some(t) = self.strict_tol {
            if !(t >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "time.strict_tol",
                    value: t,
                    reason: "must be >= 0",
                });
            }
        }
        Ok(e)
    }

    /// Regularizations actually sampled: `[eps, sweep...]`, or `[0]` for `p >= 2`.
    pub fn effective_eps(&self) -> Vec<f64> {
        if self.p >= 2.0 {
            return vec![0.0];
        }
        let mut v = vec![self.eps];
        for &x in &self.eps_sweep {
            if !v.contains(&x) {
                v.push(x);
            }
        }
        v
    }
}

/// Density at one instant, for original-variable output.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub tau: f64,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub series: DiagnosticsSeries,
    pub snapshots: Vec<Snapshot>,
    pub init: InitialData,
    pub state: TimeState,
}

fn record(state: &TimeState, eq: &Equilibrium, mobility: &Mobility, eps: &[f64]) -> Result<Sample> {
    let mut s = sample_field(state.tau, &state.field.values, eq, mobility, eps)?;
    s.clipped_mass = state.clipped_mass;
    s.step_count = state.step_count;
    Ok(s)
}

/// Diagnostics of a density `u` on the equilibrium's grid. `eps[0]` is the
/// regularization of the sampled functionals; `max Phi_eps` is recorded for
/// every entry. Step and clipping counters are left at zero.
pub fn sample_field(
    tau: f64,
    u: &[f64],
    eq: &Equilibrium,
    mobility: &Mobility,
    eps: &[f64],
) -> Result<Sample> {
    if u.len() != eq.u.len() || eps.is_empty() {
        return Err(Error::Domain {
            op: "sample",
            detail: format!(
                "{} values on {} cells, {} regularizations",
                u.len(),
                eq.u.len(),
                eps.len()
            ),
        });
    }
    let (mut w_min, mut w_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for (a, b) in u.iter().zip(&eq.u) {
        let w = a / b;
        w_min = w_min.min(w);
        w_max = w_max.max(w);
    }
    let vol = &eq.grid.volumes;
    Ok(Sample {
        tau,
        mass: eq.grid.integrate(u),
        functionals: sample(u, eq, mobility, eps[0])?,
        i_rel_exact: if mobility.eps_reg == 0.0 {
            None
        } else {
            Some(fisher_information(
                u,
                eq,
                &Mobility {
                    p: mobility.p,
                    eps_reg: 0.0,
                },
            )?)
        },
        l1_dist: vol
            .iter()
            .zip(u.iter().zip(&eq.u))
            .map(|(w, (a, b))| w * (a - b).abs())
            .sum(),
        w_min,
        w_max,
        clipped_mass: 0.0,
        phi_eps: eps.iter().map(|&x| phi_eps_max(u, eq, x)).collect(),
        grad_quotient: gradient_quotient_max(u, eq),
        step_count: 0,
    })
}

/// Advance from the sandwiched datum to `tau_end`, sampling every `cadence`
/// (samples land exactly on `k * cadence`). A snapshot is kept at the first
/// sample at or after each multiple of `snapshot_interval`.
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    let e = cfg.validate()?;
    let grid = Arc::new(RadialGrid::new(cfg.n, cfg.r_max, cfg.cells, cfg.stretch)?);
    let init = build_initial_data(&e, cfg.d0, cfg.d1, grid, &cfg.shape)?;
    let eq = init.equilibrium.clone();
    let eps_reg = cfg
        .eps_reg
        .unwrap_or(if e.p < 2.0 { eq.grid.h_min() } else { 0.0 });
    let mobility = Mobility { p: e.p, eps_reg };
    let policy = StepPolicy {
        scheme: cfg.scheme,
        safety: cfg.safety,
        guard: cfg.strict_tol.map(|tol| SandwichGuard {
            w0: init.bounds.w0,
            w1: init.bounds.w1,
            tol,
        }),
    };
    let stepper = Stepper::new(Scheme::new(eq.clone(), mobility), policy)?;
    let eps = cfg.effective_eps();
    let meta = SeriesMeta {
        config_hash: cfg.config_hash.clone(),
        seed: cfg.seed,
        m: cfg.m,
        p: cfg.p,
        n: cfg.n,
        r_max: cfg.r_max,
        cells: cfg.cells,
        stretch: cfg.stretch,
        d0: cfg.d0,
        d1: cfg.d1,
        dstar: eq.profile.d,
        dstar_continuum: solve_dstar(&e, init.mass)?.d,
        w0: init.bounds.w0,
        w1: init.bounds.w1,
        eps: eps[0],
        eps_reg,
        eps_sweep: eps.clone(),
        scheme: cfg.scheme,
        safety: cfg.safety,
        cadence: cfg.cadence,
        tau_end: cfg.tau_end,
    };
    let mut series = DiagnosticsSeries::new(meta);
    let mut snapshots = Vec::new();
    let mut next_snap = 0.0;
    let mut state = stepper.initial_state(init.field.clone());
    let mut k = 0usize;
    loop {
        series.push(record(&state, &eq, &mobility, &eps)?)?;
        if let Some(iv) = cfg.snapshot_interval {
            if state.tau >= next_snap - 1e-12 {
                snapshots.push(Snapshot {
                    tau: state.tau,
                    values: state.field.values.clone(),
                });
                while next_snap <= state.tau + 1e-12 {
                    next_snap += iv;
                }
            }
        }
        if state.tau >= cfg.tau_end {
            break;
        }
        k += 1;
        let target = (k as f64 * cfg.cadence).min(cfg.tau_end);
        stepper.advance_to(&mut state, target)?;
        log::trace!("tau {} after {} steps", state.tau, state.step_count);
    }
    Ok(SimulationOutput {
        series,
        snapshots,
        init,
        state,
    })
}
