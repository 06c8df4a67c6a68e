use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::linalg::solve_tridiagonal;
use crate::solver::grid::RadialGrid;
use crate::solver::scheme::{FluxWork, Scheme};

/// Nonnegative cell values on a radial grid.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    pub grid: Arc<RadialGrid>,
    pub exponents: Exponents,
    pub values: Vec<f64>,
}

impl DensityField {
    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn l1_distance(&self, other: &[f64]) -> f64 {
        self.grid
            .volumes
            .iter()
            .zip(self.values.iter().zip(other))
            .map(|(w, (a, b))| w * (a - b).abs())
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeScheme {
    /// Backward Euler with a damped Newton solve, finished by a conservative flux update.
    Implicit,
    /// Forward Euler under a diffusive CFL bound.
    Explicit,
}

/// Strict-mode bound on the quotient `w = u/u*`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichGuard {
    pub w0: f64,
    pub w1: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepPolicy {
    pub scheme: TimeScheme,
    pub safety: f64,
    pub guard: Option<SandwichGuard>,
}

impl Default for StepPolicy {
    fn default() -> Self {
        StepPolicy {
            scheme: TimeScheme::Implicit,
            safety: 0.4,
            guard: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TimeState {
    pub tau: f64,
    pub field: DensityField,
    pub step_count: usize,
    pub last_dt: f64,
    /// Proposed size of the next implicit step.
    pub next_dt: f64,
    pub rejected_steps: usize,
    /// Mass added by positivity clipping, cumulative.
    pub clipped_mass: f64,
}

const NEWTON_TOL: f64 = 1e-10;
const NEWTON_MAX_IT: usize = 30;
const DT_FLOOR: f64 = 1e-14;
/// Clipped cells are raised to this fraction of the equilibrium value.
const CLIP_FRACTION: f64 = 1e-12;

/// Advances `TimeState` with a fixed scheme and policy.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub scheme: Scheme,
    pub policy: StepPolicy,
    dt_cap: f64,
}

struct Work {
    flux: FluxWork,
    div: Vec<f64>,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
}

impl Work {
    fn new(n: usize) -> Self {
        Work {
            flux: FluxWork::default(),
            div: Vec::with_capacity(n),
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
            rhs: vec![0.0; n],
        }
    }
}

impl Stepper {
    pub fn new(scheme: Scheme, policy: StepPolicy) -> Result<Self> {
        if !(policy.safety > 0.0) {
            return Err(Error::InvalidParameter {
                name: "time.safety",
                value: policy.safety,
                reason: "must be positive",
            });
        }
        // drift Courant limit: the transport velocity is y, so dt <= dr/r
        let g = &scheme.eq.grid;
        let courant = g
            .edges
            .windows(2)
            .skip(1)
            .map(|p| (p[1] - p[0]) / p[1])
            .fold(f64::INFINITY, f64::min)
            .min(1.0);
        Ok(Stepper {
            dt_cap: policy.safety * courant,
            scheme,
            policy,
        })
    }

    pub fn dt_cap(&self) -> f64 {
        self.dt_cap
    }

    pub fn initial_state(&self, field: DensityField) -> TimeState {
        TimeState {
            tau: 0.0,
            field,
            step_count: 0,
            last_dt: 0.0,
            next_dt: self.dt_cap * 1e-3,
            rejected_steps: 0,
            clipped_mass: 0.0,
        }
    }

    /// One accepted step of size at most `dt_limit`.
    pub fn step(&self, state: &mut TimeState, dt_limit: f64) -> Result<()> {
        let mut work = Work::new(self.scheme.cells());
        self.step_with(state, dt_limit, &mut work)
    }

    /// Step until `tau_target` is reached exactly.
    pub fn advance_to(&self, state: &mut TimeState, tau_target: f64) -> Result<()> {
        let mut work = Work::new(self.scheme.cells());
        while state.tau < tau_target {
            let remaining = tau_target - state.tau;
            if remaining <= 1e-12 * tau_target.abs().max(1.0) {
                state.tau = tau_target;
                break;
            }
            self.step_with(state, remaining, &mut work)?;
        }
        Ok(())
    }

    fn step_with(&self, state: &mut TimeState, dt_limit: f64, work: &mut Work) -> Result<()> {
        let new = match self.policy.scheme {
            TimeScheme::Explicit => self.explicit(state, dt_limit, work)?,
            TimeScheme::Implicit => self.implicit(state, dt_limit, work)?,
        };
        self.finish(state, new)
    }

    fn explicit(&self, state: &mut TimeState, dt_limit: f64, w: &mut Work) -> Result<Vec<f64>> {
        let u = &state.field.values;
        let s = &self.scheme;
        if !s.fluxes(u, &mut w.flux) {
            return Err(Error::NonFinite {
                context: "flux",
                tau: state.tau,
            });
        }
        s.jacobian(u, &w.flux, &mut w.lower, &mut w.diag, &mut w.upper);
        let vol = &s.eq.grid.volumes;
        let n = u.len();
        // |dD_i/du_i| bounds the local relaxation rate; add the off-diagonal outflow
        let mut dt = f64::INFINITY;
        for i in 0..n {
            let mut rate = w.diag[i].abs();
            if i > 0 {
                rate = rate.max(w.upper[i - 1].abs());
            }
            if i + 1 < n {
                rate = rate.max(w.lower[i + 1].abs());
            }
            if rate > 0.0 {
                dt = dt.min(vol[i] / rate);
            }
        }
        let dt = (self.policy.safety * dt).min(self.dt_cap).min(dt_limit);
        if !(dt > DT_FLOOR * state.tau.max(1.0)) && dt < dt_limit {
            return Err(Error::StepUnderflow { tau: state.tau, dt });
        }
        s.divergence_from(&w.flux.flux, &mut w.div);
        state.last_dt = dt;
        Ok(u.iter()
            .zip(&w.div)
            .zip(vol)
            .map(|((v, d), w)| v + dt * d / w)
            .collect())
    }

    fn implicit(&self, state: &mut TimeState, dt_limit: f64, w: &mut Work) -> Result<Vec<f64>> {
        let mut dt_try = state.next_dt.min(self.dt_cap);
        loop {
            let dt = dt_try.min(dt_limit);
            if dt < DT_FLOOR * state.tau.max(1.0) && dt < dt_limit {
                return Err(Error::StepUnderflow { tau: state.tau, dt });
            }
            if let Some(x) = self.newton(&state.field.values, dt, w) {
                if dt_try <= dt_limit {
                    state.next_dt = (1.5 * dt_try).min(self.dt_cap);
                } else {
                    state.next_dt = dt_try;
                }
                state.last_dt = dt;
                // conservative finish: u^{n+1} = u^n + dt D(x)/w with the flux at the solution
                let vol = &self.scheme.eq.grid.volumes;
                return Ok(state
                    .field
                    .values
                    .iter()
                    .zip(&x)
                    .zip(vol)
                    .map(|((v, d), w)| v + dt * d / w)
                    .collect());
            }
            state.rejected_steps += 1;
            dt_try = 0.5 * dt;
        }
    }

    /// Backward Euler solve; returns `D(x)` at the converged iterate.
    fn newton(&self, un: &[f64], dt: f64, w: &mut Work) -> Option<Vec<f64>> {
        let s = &self.scheme;
        let vol = &s.eq.grid.volumes;
        let n = un.len();
        let mut x = un.to_vec();
        for _ in 0..NEWTON_MAX_IT {
            if !s.fluxes(&x, &mut w.flux) {
                return None;
            }
            s.divergence_from(&w.flux.flux, &mut w.div);
            s.jacobian(&x, &w.flux, &mut w.lower, &mut w.diag, &mut w.upper);
            for i in 0..n {
                w.rhs[i] = -(vol[i] * (x[i] - un[i]) - dt * w.div[i]);
                w.diag[i] = vol[i] - dt * w.diag[i];
                w.lower[i] *= -dt;
                w.upper[i] *= -dt;
            }
            if !solve_tridiagonal(&w.lower, &w.diag, &w.upper, &mut w.rhs) {
                return None;
            }
            let mut theta: f64 = 1.0;
            let mut change: f64 = 0.0;
            for i in 0..n {
                let d = w.rhs[i];
                if !d.is_finite() {
                    return None;
                }
                if d < 0.0 {
                    theta = theta.min(0.9 * x[i] / -d);
                }
                change = change.max((d / x[i]).abs());
            }
            for i in 0..n {
                x[i] += theta * w.rhs[i];
            }
            if theta == 1.0 && change < NEWTON_TOL {
                if !s.fluxes(&x, &mut w.flux) {
                    return None;
                }
                s.divergence_from(&w.flux.flux, &mut w.div);
                return Some(w.div.clone());
            }
        }
        None
    }

    fn finish(&self, state: &mut TimeState, mut new: Vec<f64>) -> Result<()> {
        let vol = &self.scheme.eq.grid.volumes;
        let ustar = &self.scheme.eq.u;
        for i in 0..new.len() {
            if !new[i].is_finite() {
                return Err(Error::NonFinite {
                    context: "density update",
                    tau: state.tau,
                });
            }
            if new[i] <= 0.0 {
                let floor = CLIP_FRACTION * ustar[i];
                state.clipped_mass += vol[i] * (floor - new[i]);
                new[i] = floor;
            }
        }
        state.tau += state.last_dt;
        state.step_count += 1;
        state.field.values = new;
        if let Some(g) = self.policy.guard {
            for (i, (v, us)) in state.field.values.iter().zip(ustar).enumerate() {
                let w = v / us;
                if w < g.w0 - g.tol || w > g.w1 + g.tol {
                    return Err(Error::SandwichBreach {
                        radius: self.scheme.eq.grid.centers[i],
                        tau: state.tau,
                        w,
                    });
                }
            }
        }
        Ok(())
    }
}
