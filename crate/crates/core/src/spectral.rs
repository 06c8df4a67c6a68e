//! Weighted Hardy-Poincare constant by sector decomposition.
//!
//! In the spherical-harmonic sector `l`, the Rayleigh quotient
//! `int |grad g|^2 d nu_eps / int g^2 d mu` reduces to a radial pencil
//! `K g = lambda M g` with
//! `K = sum_e A_e nu(r_e)/dR_e (g_{e+1} - g_e)^2 + l(l+n-2) sum_i nu(r_i) w_i g_i^2 / r_i^2`
//! and `M = sum_i w_i mu(r_i) g_i^2`. The angular term is nonnegative and grows
//! with `l`, so sector eigenvalues are nondecreasing in `l`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::barenblatt::BarenblattProfile;
use crate::error::{Error, Result};
use crate::functionals::edge_stiffness;
use crate::linalg::{solve_tridiagonal, sturm_count};
use crate::solver::{Equilibrium, RadialGrid};
use std::sync::Arc;

/// Assembled radial pencil for one sector.
#[derive(Debug, Clone)]
pub struct SpectralProblem {
    pub eq: Equilibrium,
    pub eps: f64,
    pub ell: usize,
    /// Edge weights `A_e nu_eps(r_e) / dR_e`.
    pub stiffness: Vec<f64>,
    /// Cell weights `l(l+n-2) nu_eps(r_i) w_i / r_i^2`.
    pub potential: Vec<f64>,
    /// Cell weights `w_i mu(r_i)`.
    pub mass: Vec<f64>,
}

fn build(eq: &Equilibrium, eps: f64, ell: usize) -> Result<SpectralProblem> {
    let e = &eq.profile.exponents;
    let grid = &eq.grid;
    let stiffness = edge_stiffness(eq, eps)?;
    let ang = (ell * (ell + e.n - 2)) as f64;
    let potential = grid
        .centers
        .iter()
        .zip(&grid.volumes)
        .zip(&eq.u)
        .map(|((&r, w), u)| ang * u * (eps + r.powf(e.q - 1.0)).powf(e.p - 2.0) * w / (r * r))
        .collect();
    let mass = grid
        .volumes
        .iter()
        .zip(&eq.f2)
        .map(|(w, f)| w / f)
        .collect();
    let sp = SpectralProblem {
        eq: eq.clone(),
        eps,
        ell,
        stiffness,
        potential,
        mass,
    };
    let bad = sp
        .stiffness
        .iter()
        .chain(&sp.potential)
        .any(|v| !(v.is_finite() && *v >= 0.0))
        || sp.mass.iter().any(|v| !(v.is_finite() && *v > 0.0));
    if bad {
        return Err(Error::Indefinite {
            ell,
            detail: "non-finite or negative weight".into(),
        });
    }
    Ok(sp)
}

/// Assemble sector `ell` with weight `nu_eps`. `eps = 0` is rejected for `p < 2`.
pub fn assemble(eq: &Equilibrium, eps: f64, ell: usize) -> Result<SpectralProblem> {
    let p = eq.profile.exponents.p;
    if p < 2.0 && !(eps > 0.0) {
        return Err(Error::SingularWeight { p });
    }
    build(eq, eps, ell)
}

/// Assemble with the plain weight `nu` evaluated only at `r > 0`
/// (edges and cell centers), which sidesteps the origin singularity for `p < 2`.
pub fn assemble_origin_excluded(eq: &Equilibrium, ell: usize) -> Result<SpectralProblem> {
    build(eq, 0.0, ell)
}

impl SpectralProblem {
    pub fn q_nu(&self, g: &[f64]) -> f64 {
        let grad: f64 = self
            .stiffness
            .iter()
            .zip(g.windows(2))
            .map(|(k, p)| k * (p[1] - p[0]) * (p[1] - p[0]))
            .sum();
        grad + self
            .potential
            .iter()
            .zip(g)
            .map(|(w, v)| w * v * v)
            .sum::<f64>()
    }

    pub fn q_mu(&self, g: &[f64]) -> f64 {
        self.mass.iter().zip(g).map(|(w, v)| w * v * v).sum()
    }

    /// Symmetric tridiagonal form `M^{-1/2} K M^{-1/2}`.
    fn symmetric(&self) -> (Vec<f64>, Vec<f64>) {
        let n = self.mass.len();
        let mut d = vec![0.0; n];
        for i in 0..n {
            let mut k = self.potential[i];
            if i > 0 {
                k += self.stiffness[i - 1];
            }
            if i + 1 < n {
                k += self.stiffness[i];
            }
            d[i] = k / self.mass[i];
        }
        let off = (0..n - 1)
            .map(|i| -self.stiffness[i] / (self.mass[i] * self.mass[i + 1]).sqrt())
            .collect();
        (d, off)
    }
}

/// Eigenpair of a sector pencil; `vector` is in the `g` variable.
#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

const RQI_MAX_IT: usize = 60;

/// `index`-th smallest eigenvalue (0-based) of the pencil, by Sturm bisection
/// followed by shifted inverse iteration with Rayleigh-quotient updates.
/// For `index >= 1` in sector 0 the iterate is kept `mu`-orthogonal to constants.
pub fn eigenpair(problem: &SpectralProblem, index: usize) -> Result<Eigenpair> {
    let (d, off) = problem.symmetric();
    let n = d.len();
    if index >= n {
        return Err(Error::Domain {
            op: "eigenpair",
            detail: format!("index {index} >= size {n}"),
        });
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r =
            if i > 0 { off[i - 1].abs() } else { 0.0 } + if i + 1 < n { off[i].abs() } else { 0.0 };
        lo = lo.min(d[i] - r);
        hi = hi.max(d[i] + r);
    }
    if lo < -1e-12 * hi {
        // a PSD pencil cannot have negative Gershgorin mass beyond round-off unless
        // the eigenvalue itself is negative; count to be sure
        if sturm_count(&d, &off, -1e-10 * hi) > 0 {
            return Err(Error::Indefinite {
                ell: problem.ell,
                detail: "negative eigenvalue".into(),
            });
        }
    }
    lo = lo.min(0.0);
    let norm = hi.abs();
    // smallest x with more than `index` eigenvalues below it
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if sturm_count(&d, &off, mid) > index {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-15 * hi.abs().max(1e-300) {
            break;
        }
    }
    let approx = 0.5 * (lo + hi);
    let sqrt_m: Vec<f64> = problem.mass.iter().map(|m| m.sqrt()).collect();
    let kernel: Option<Vec<f64>> = if problem.ell == 0 && index >= 1 {
        let norm = sqrt_m.iter().map(|v| v * v).sum::<f64>().sqrt();
        Some(sqrt_m.iter().map(|v| v / norm).collect())
    } else {
        None
    };
    let project = |y: &mut Vec<f64>| {
        if let Some(k) = &kernel {
            let c: f64 = y.iter().zip(k).map(|(a, b)| a * b).sum();
            for (a, b) in y.iter_mut().zip(k) {
                *a -= c * b;
            }
        }
        let nrm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for a in y.iter_mut() {
            *a /= nrm;
        }
    };
    let mut y: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.01 * ((i * 7919) % 113) as f64)
        .collect();
    project(&mut y);
    let gap = approx.abs().max(1e-300);
    let mut shift = approx - 1e-9 * gap;
    let mut value = f64::NAN;
    let lower = {
        let mut l = off.clone();
        l.insert(0, 0.0);
        l
    };
    let mut upper = off.clone();
    upper.push(0.0);
    for it in 0..RQI_MAX_IT {
        let diag: Vec<f64> = d.iter().map(|v| v - shift).collect();
        let mut x = y.clone();
        if !solve_tridiagonal(&lower, &diag, &upper, &mut x) {
            shift -= 1e-7 * gap;
            continue;
        }
        project(&mut x);
        y = x;
        let g: Vec<f64> = y.iter().zip(&sqrt_m).map(|(a, b)| a / b).collect();
        let rq = problem.q_nu(&g) / problem.q_mu(&g);
        let done = value.is_finite() && (rq - value).abs() <= 1e-12 * rq.abs().max(1e-300);
        value = rq;
        if done {
            // confirm it is the requested eigenvalue
            let band = 1e-6 * value.abs() + 1e-12 * norm;
            let below = sturm_count(&d, &off, value - band);
            let above = sturm_count(&d, &off, value + band);
            if below > index || above <= index {
                return Err(Error::NonConvergence {
                    what: "sector eigenvalue (wrong index)",
                    iterations: it,
                });
            }
            if ((value - approx) / value).abs() > 1e-6 {
                log::debug!(
                    "bisection {approx} vs Rayleigh {value} in sector {}",
                    problem.ell
                );
            }
            return Ok(Eigenpair {
                value,
                vector: g,
                iterations: it + 1,
            });
        }
        shift = value - 1e-10 * gap;
    }
    Err(Error::NonConvergence {
        what: "sector eigenvalue",
        iterations: RQI_MAX_IT,
    })
}

/// Smallest admissible eigenvalue: deflated against constants in sector 0.
pub fn smallest_eigenvalue(problem: &SpectralProblem) -> Result<f64> {
    let index = usize::from(problem.ell == 0);
    Ok(eigenpair(problem, index)?.value)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorEigenvalue {
    pub ell: usize,
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapResult {
    pub eps: f64,
    pub cells: usize,
    /// Inverse of the smallest admissible eigenvalue over all sectors.
    pub beta_tilde: f64,
    pub sectors: Vec<SectorEigenvalue>,
    pub argmin_ell: usize,
    /// `2(p-1)/beta_tilde` for `p < 2`, `2/beta_tilde` for `p >= 2`.
    pub beta: f64,
    /// `2(p-1) lambda_0`: exact decay rate of the radial linearized entropy
    /// (for radial perturbations `I_0 = I`).
    pub radial_rate: f64,
    /// `|beta_tilde(refined)/beta_tilde - 1|`, when a refined grid was solved.
    pub refinement_delta: Option<f64>,
}

/// Sector sweep on the equilibrium's own grid. `eps = 0` with `p < 2` uses
/// the origin-excluded weight.
pub fn gap_on_grid(eq: &Equilibrium, eps: f64, ell_max: usize) -> Result<GapResult> {
    let e = eq.profile.exponents;
    let sectors: Vec<SectorEigenvalue> = (0..=ell_max)
        .into_par_iter()
        .map(|ell| {
            let prob = if eps == 0.0 {
                assemble_origin_excluded(eq, ell)?
            } else {
                assemble(eq, eps, ell)?
            };
            Ok(SectorEigenvalue {
                ell,
                eigenvalue: smallest_eigenvalue(&prob)?,
            })
        })
        .collect::<Result<_>>()?;
    let best = sectors
        .iter()
        .min_by(|a, b| a.eigenvalue.total_cmp(&b.eigenvalue))
        .copied()
        .ok_or(Error::Domain {
            op: "gap",
            detail: "no sectors".into(),
        })?;
    let beta_tilde = 1.0 / best.eigenvalue;
    let beta = if e.p < 2.0 {
        2.0 * (e.p - 1.0) / beta_tilde
    } else {
        2.0 / beta_tilde
    };
    Ok(GapResult {
        eps,
        cells: eq.grid.cells(),
        beta_tilde,
        radial_rate: 2.0 * (e.p - 1.0) * sectors[0].eigenvalue,
        sectors,
        argmin_ell: best.ell,
        beta,
        refinement_delta: None,
    })
}

/// Hardy-Poincare constant on `grid` and on its refinement.
pub fn hardy_poincare_constant(
    profile: &BarenblattProfile,
    eps: f64,
    grid: Arc<RadialGrid>,
    ell_max: usize,
) -> Result<GapResult> {
    if ell_max < 1 {
        return Err(Error::InvalidParameter {
            name: "spectral.ell_max",
            value: ell_max as f64,
            reason: "must be >= 1",
        });
    }
    let p = profile.exponents.p;
    if p < 2.0 && !(eps > 0.0) {
        return Err(Error::SingularWeight { p });
    }
    let fine = Arc::new(grid.refined()?);
    let eq = Equilibrium::new(*profile, grid)?;
    let eq_fine = Equilibrium::new(*profile, fine)?;
    let (coarse, fine) = rayon::join(
        || gap_on_grid(&eq, eps, ell_max),
        || gap_on_grid(&eq_fine, eps, ell_max),
    );
    let (mut coarse, fine) = (coarse?, fine?);
    coarse.refinement_delta = Some((fine.beta_tilde / coarse.beta_tilde - 1.0).abs());
    Ok(coarse)
}

/// Backward-Euler evolution of the radial linearized equation in the
/// dissipation form `dE/dtau = -(I + (p-2) I_0) = -(p-1) I`.
/// Returns `E[v]` after each step, starting with `E[v0]`.
pub fn linearized_decay(eq: &Equilibrium, v0: &[f64], dt: f64, steps: usize) -> Result<Vec<f64>> {
    let e = eq.profile.exponents;
    let prob = assemble_origin_excluded(eq, 0)?;
    let n = v0.len();
    let k: Vec<f64> = prob.stiffness.iter().map(|s| (e.p - 1.0) * s).collect();
    let m = &prob.mass;
    let mut lower = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut upper = vec![0.0; n];
    for i in 0..n {
        diag[i] = m[i];
        if i > 0 {
            diag[i] += dt * k[i - 1];
            lower[i] = -dt * k[i - 1];
        }
        if i + 1 < n {
            diag[i] += dt * k[i];
            upper[i] = -dt * k[i];
        }
    }
    let mut g: Vec<f64> = v0.iter().zip(&eq.f2).map(|(v, f)| v * f).collect();
    let energy = |g: &[f64]| 0.5 * prob.q_mu(g);
    let mut out = Vec::with_capacity(steps + 1);
    out.push(energy(&g));
    for _ in 0..steps {
        let mut rhs: Vec<f64> = g.iter().zip(m).map(|(a, b)| a * b).collect();
        if !solve_tridiagonal(&lower, &diag, &upper, &mut rhs) {
            return Err(Error::NonFinite {
                context: "linearized step",
                tau: f64::NAN,
            });
        }
        g = rhs;
        out.push(energy(&g));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponents::Exponents;
    use crate::functionals::{eps_linear_fisher, linear_entropy};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn eq(m: f64, p: f64, cells: usize) -> Equilibrium {
        let e = Exponents::derive(m, p, 3).unwrap();
        let stretch = (1.0 + 0.03f64).powf(512.0 / cells as f64);
        let g = Arc::new(RadialGrid::new(3, 1e5, cells, stretch).unwrap());
        Equilibrium::new(BarenblattProfile::new(e, 1.0).unwrap(), g).unwrap()
    }

    #[test]
    fn constants_in_kernel() {
        let q = eq(4.0 / 3.0, 1.5, 128);
        let p0 = assemble(&q, 0.1, 0).unwrap();
        let ones = vec![1.0; 128];
        assert_eq!(p0.q_nu(&ones), 0.0);
        let lam0 = eigenpair(&p0, 0).unwrap().value;
        assert!(lam0.abs() < 1e-10, "{lam0}");
        let p1 = assemble(&q, 0.1, 1).unwrap();
        let g: Vec<f64> = (0..128).map(|i| (i as f64 * 0.1).sin()).collect();
        assert!(p1.q_nu(&g) >= p0.q_nu(&g));
    }

    #[test]
    fn singular_weight_rejected() {
        let q = eq(4.0 / 3.0, 1.5, 64);
        assert!(matches!(
            assemble(&q, 0.0, 0),
            Err(Error::SingularWeight { .. })
        ));
        assert!(assemble_origin_excluded(&q, 0).is_ok());
        assert!(assemble(&eq(0.1, 3.0, 64), 0.0, 0).is_ok());
    }

    #[test]
    fn far_field_weights_follow_power_laws() {
        let q = eq(4.0 / 3.0, 1.5, 256);
        let b = q.profile;
        let r = *q.grid.centers.last().unwrap();
        let i = q.grid.cells() - 1;
        let p = assemble_origin_excluded(&q, 0).unwrap();
        let mu = p.mass[i] / q.grid.volumes[i];
        assert!((mu / b.mu_far_field(r) - 1.0).abs() < 1e-3);
        let k = i - 1;
        let re = q.grid.edge_radius(k);
        let nu = p.stiffness[k] * q.grid.spacing[k] / q.grid.areas[k];
        assert!((nu / b.nu_far_field(re) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn eigenvalues_monotone_in_ell_and_rayleigh_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for (m, p, eps) in [(4.0 / 3.0, 1.5, 0.1), (0.1, 3.0, 0.0)] {
            let q = eq(m, p, 256);
            let gap = gap_on_grid(&q, eps, 4).unwrap();
            for w in gap.sectors.windows(2) {
                assert!(w[1].eigenvalue >= w[0].eigenvalue * (1.0 - 1e-9) || w[0].ell == 0);
            }
            assert!(gap.argmin_ell <= 1);
            let prob = assemble_origin_excluded(&q, 0).unwrap();
            let prob = if eps > 0.0 {
                assemble(&q, eps, 0).unwrap()
            } else {
                prob
            };
            let lam = smallest_eigenvalue(&prob).unwrap();
            for _ in 0..50 {
                let a: f64 = rng.gen_range(-1.0..1.0);
                let s: f64 = rng.gen_range(0.1..10.0);
                let raw: Vec<f64> = q
                    .grid
                    .centers
                    .iter()
                    .map(|&r| a + (r / s).atan() + rng.gen_range(-0.1..0.1))
                    .collect();
                let mean = prob.mass.iter().zip(&raw).map(|(w, g)| w * g).sum::<f64>()
                    / prob.mass.iter().sum::<f64>();
                let g: Vec<f64> = raw.iter().map(|v| v - mean).collect();
                assert!(prob.q_nu(&g) / prob.q_mu(&g) >= lam * (1.0 - 1e-6));
            }
        }
    }

    #[test]
    fn eps_monotonicity_for_fast_gradient() {
        let q = eq(4.0 / 3.0, 1.5, 256);
        let mut prev = 1.0 / gap_on_grid(&q, 0.0, 2).unwrap().beta_tilde;
        for &eps in &[1e-3, 1e-2, 0.1, 1.0] {
            let gap = gap_on_grid(&q, eps, 2).unwrap();
            // beta_tilde nondecreasing in eps means the minimal eigenvalue is nonincreasing
            assert!(1.0 / gap.beta_tilde <= prev * (1.0 + 1e-9));
            prev = 1.0 / gap.beta_tilde;
        }
    }

    #[test]
    fn linearized_entropy_inequality_holds_on_eigenvector() {
        let q = eq(4.0 / 3.0, 1.5, 256);
        let prob = assemble(&q, 0.1, 0).unwrap();
        let pair = eigenpair(&prob, 1).unwrap();
        let v: Vec<f64> = pair.vector.iter().zip(&q.f2).map(|(g, f)| g / f).collect();
        let lin_e = linear_entropy(&v, &q);
        let i_eps = eps_linear_fisher(&v, &q, 0.1).unwrap();
        // equality case of E <= (beta_tilde/2) I_eps for the radial sector
        assert!((lin_e / (0.5 * i_eps / pair.value) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn linearized_evolution_decays_at_least_at_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for (m, p, eps) in [(4.0 / 3.0, 1.5, 0.1), (0.1, 3.0, 0.0)] {
            let q = eq(m, p, 256);
            let beta = gap_on_grid(&q, eps, 2).unwrap().beta;
            for _ in 0..5 {
                let a: f64 = rng.gen_range(0.3..3.0);
                let raw: Vec<f64> = q
                    .grid
                    .centers
                    .iter()
                    .zip(&q.u)
                    .map(|(&r, u)| u * ((-r / a).exp() + rng.gen_range(-0.2..0.2)))
                    .collect();
                let c = q.grid.integrate(&raw) / q.mass();
                let v: Vec<f64> = raw.iter().zip(&q.u).map(|(x, u)| x - c * u).collect();
                let dt = 0.01;
                let es = linearized_decay(&q, &v, dt, 500).unwrap();
                for (k, e) in es.iter().enumerate() {
                    assert!(*e <= (-beta * dt * k as f64).exp() * es[0] * (1.0 + 1e-9));
                }
            }
        }
    }
}
