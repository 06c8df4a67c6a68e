use std::sync::Arc;

use crate::barenblatt::BarenblattProfile;
use crate::error::Result;
use crate::solver::grid::RadialGrid;

/// A Barenblatt equilibrium sampled on a grid, with the quantities every
/// discrete operator needs precomputed.
#[derive(Debug, Clone)]
pub struct Equilibrium {
    pub profile: BarenblattProfile,
    pub grid: Arc<RadialGrid>,
    /// `u*(r_i)` at cell centers.
    pub u: Vec<f64>,
    /// `u*(r_e)` at interior edges.
    pub u_edge: Vec<f64>,
    /// `F''(u*(r_i))`.
    pub f2: Vec<f64>,
    /// `F'(u*(r_i))`.
    pub f1: Vec<f64>,
    /// Discrete `d/dr F'(u*)` across each interior edge: `-(c(r_{i+1}) - c(r_i)) / dR`.
    pub sigma: Vec<f64>,
}

impl Equilibrium {
    pub fn new(profile: BarenblattProfile, grid: Arc<RadialGrid>) -> Result<Self> {
        let e = profile.exponents;
        let u: Vec<f64> = grid.centers.iter().map(|&r| profile.eval(r)).collect();
        let u_edge = (0..grid.cells() - 1)
            .map(|k| profile.eval(grid.edge_radius(k)))
            .collect();
        let f2 = u.iter().map(|&v| e.m * v.powf(e.gamma - 2.0)).collect();
        let f1 = grid.centers.iter().map(|&r| profile.f_prime(r)).collect();
        let sigma = grid
            .centers
            .windows(2)
            .zip(&grid.spacing)
            .map(|(c, dr)| -(c[1].powf(e.q) - c[0].powf(e.q)) / (e.q * dr))
            .collect();
        Ok(Equilibrium {
            profile,
            grid,
            u,
            u_edge,
            f2,
            f1,
            sigma,
        })
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.u)
    }

    /// `F'(x_i) - F'(u*_i)`, evaluated without cancellation:
    /// `F'(u*) (exp((gamma-1) ln(x/u*)) - 1)`.
    pub fn psi(&self, i: usize, x: f64) -> f64 {
        let g1 = self.profile.exponents.gamma - 1.0;
        self.f1[i] * (g1 * (x / self.u[i]).ln()).exp_m1()
    }
}
