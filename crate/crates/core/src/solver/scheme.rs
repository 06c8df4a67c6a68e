use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::equilibrium::Equilibrium;

/// Gradient nonlinearity `g(s) = s (eps_reg + |s|)^{p-2}`, i.e. the radial
/// component of `grad c*` with an optional regularization for `p < 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mobility {
    pub p: f64,
    pub eps_reg: f64,
}

impl Mobility {
    pub fn g(&self, s: f64) -> f64 {
        if self.p == 2.0 {
            return s;
        }
        s * (self.eps_reg + s.abs()).powf(self.p - 2.0)
    }

    pub fn dg(&self, s: f64) -> f64 {
        if self.p == 2.0 {
            return 1.0;
        }
        let a = s.abs();
        if self.eps_reg == 0.0 {
            // finite even at s = 0 so Newton never sees an infinite pivot
            return (self.p - 1.0) * a.max(f64::MIN_POSITIVE).powf(self.p - 2.0);
        }
        (self.eps_reg + a).powf(self.p - 3.0) * (self.eps_reg + (self.p - 1.0) * a)
    }
}

/// Well-balanced finite-volume discretization of the rescaled equation.
///
/// The edge flux is `Phi = u_avg (g(s) - g(sigma))` where `s` is the centered
/// difference of `F'(u)` and `sigma` the same difference for the equilibrium.
/// Since `g(sigma)` plays the role of `-r` at the edge, every sampled
/// Barenblatt profile is an exact discrete steady state.
#[derive(Debug, Clone)]
pub struct Scheme {
    pub eq: Equilibrium,
    pub mobility: Mobility,
    g_sigma: Vec<f64>,
}

/// Per-cell work arrays for one flux evaluation.
#[derive(Debug, Clone, Default)]
pub struct FluxWork {
    pub psi: Vec<f64>,
    pub s: Vec<f64>,
    pub flux: Vec<f64>,
}

impl Scheme {
    pub fn new(eq: Equilibrium, mobility: Mobility) -> Self {
        let g_sigma = eq.sigma.iter().map(|&s| mobility.g(s)).collect();
        Scheme {
            eq,
            mobility,
            g_sigma,
        }
    }

    pub fn cells(&self) -> usize {
        self.eq.u.len()
    }

    /// `psi_i = F'(u_i) - F'(u*_i)`.
    pub fn psi(&self, u: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(u.iter().enumerate().map(|(i, &x)| self.eq.psi(i, x)));
    }

    /// Flux across interior edge `e`. Zero when both neighbours vanish.
    pub fn edge_flux(&self, u: &[f64], e: usize) -> Result<f64> {
        let avg = 0.5 * (u[e] + u[e + 1]);
        if avg == 0.0 {
            return Ok(0.0);
        }
        let dpsi = self.eq.psi(e + 1, u[e + 1]) - self.eq.psi(e, u[e]);
        let s = self.eq.sigma[e] + dpsi / self.eq.grid.spacing[e];
        let phi = avg * (self.mobility.g(s) - self.g_sigma[e]);
        if !phi.is_finite() {
            return Err(Error::NonFinite {
                context: "edge flux",
                tau: f64::NAN,
            });
        }
        Ok(phi)
    }

    /// Fill `work` with psi, edge gradients and fluxes. Returns `false` on a
    /// non-finite flux.
    pub fn fluxes(&self, u: &[f64], work: &mut FluxWork) -> bool {
        self.psi(u, &mut work.psi);
        let ne = self.cells() - 1;
        work.s.resize(ne, 0.0);
        work.flux.resize(ne, 0.0);
        let sp = &self.eq.grid.spacing;
        let mut ok = true;
        for e in 0..ne {
            let s = self.eq.sigma[e] + (work.psi[e + 1] - work.psi[e]) / sp[e];
            work.s[e] = s;
            let avg = 0.5 * (u[e] + u[e + 1]);
            let phi = if avg == 0.0 {
                0.0
            } else {
                avg * (self.mobility.g(s) - self.g_sigma[e])
            };
            ok &= phi.is_finite();
            work.flux[e] = phi;
        }
        ok
    }

    /// `D_i = A_{i+1/2} Phi_{i+1/2} - A_{i-1/2} Phi_{i-1/2}`, zero flux at both ends.
    pub fn divergence_from(&self, flux: &[f64], out: &mut Vec<f64>) {
        let a = &self.eq.grid.areas;
        let n = self.cells();
        out.clear();
        out.resize(n, 0.0);
        for (e, (&ae, &phi)) in a.iter().zip(flux).enumerate() {
            let t = ae * phi;
            out[e] += t;
            out[e + 1] -= t;
        }
    }

    /// Bands of `dD/du` at the state whose fluxes are in `work`.
    pub fn jacobian(
        &self,
        u: &[f64],
        work: &FluxWork,
        lower: &mut [f64],
        diag: &mut [f64],
        upper: &mut [f64],
    ) {
        let e_ = &self.eq.profile.exponents;
        let grid = &self.eq.grid;
        let n = self.cells();
        diag[..n].fill(0.0);
        lower[..n].fill(0.0);
        upper[..n].fill(0.0);
        for e in 0..n - 1 {
            let half = 0.5 * (self.mobility.g(work.s[e]) - self.g_sigma[e]);
            let avg = 0.5 * (u[e] + u[e + 1]);
            let c = avg * self.mobility.dg(work.s[e]) / grid.spacing[e];
            let f2l = e_.m * u[e].powf(e_.gamma - 2.0);
            let f2r = e_.m * u[e + 1].powf(e_.gamma - 2.0);
            let dl = half - c * f2l;
            let dr = half + c * f2r;
            let a = grid.areas[e];
            // D_e gains +A Phi, D_{e+1} gains -A Phi
            diag[e] += a * dl;
            upper[e] += a * dr;
            lower[e + 1] -= a * dl;
            diag[e + 1] -= a * dr;
        }
    }
}
