//! Entropies, Fisher informations and the comparison algebra between them,
//! all evaluated with the same edge differences as the solver flux.

use serde::{Deserialize, Serialize};

use crate::barenblatt::SandwichBounds;
use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::solver::{Equilibrium, Mobility};

/// `h_k(w) = (w^{k-1} - 1)/(k - 1)`, continuous through `k = 1`.
pub fn h_k(w: f64, k: f64) -> f64 {
    let l = w.ln();
    if (k - 1.0).abs() < 1e-300 {
        return l;
    }
    ((k - 1.0) * l).exp_m1() / (k - 1.0)
}

/// `h_k` restricted to the sandwich range.
pub fn h_k_checked(w: f64, k: f64, bounds: &SandwichBounds) -> Result<f64> {
    let tol = 1e-12;
    if w < bounds.w0 * (1.0 - tol) || w > bounds.w1 * (1.0 + tol) {
        return Err(Error::Domain {
            op: "h_k",
            detail: format!("w = {w} outside [{}, {}]", bounds.w0, bounds.w1),
        });
    }
    Ok(h_k(w, k))
}

/// `phi(w) = w^gamma - 1 - gamma (w - 1)`, series near `w = 1`.
fn bregman_kernel(w: f64, g: f64) -> f64 {
    let d = w - 1.0;
    if d.abs() < 0.05 {
        // sum_{k>=2} binom(g, k) d^k
        let mut c = g * (g - 1.0) / 2.0;
        let mut p = d * d;
        let mut s = 0.0;
        for k in 2..60 {
            let t = c * p;
            s += t;
            if t.abs() <= 1e-17 * s.abs() {
                break;
            }
            c *= (g - k as f64) / (k as f64 + 1.0);
            p *= d;
        }
        s
    } else {
        (g * w.ln()).exp_m1() - g * d
    }
}

/// Per-cell Bregman divergence `F(x) - F(u*) - F'(u*)(x - u*)`.
pub fn bregman(e: &Exponents, x: f64, ustar: f64) -> f64 {
    let g = e.gamma;
    e.m * ustar.powf(g) / (g * (g - 1.0)) * bregman_kernel(x / ustar, g)
}

fn check_positive(u: &[f64]) -> Result<()> {
    match u.iter().position(|v| !(*v > 0.0) || !v.is_finite()) {
        Some(i) => Err(Error::NonPositive {
            cell: i,
            value: u[i],
        }),
        None => Ok(()),
    }
}

/// Relative mass mismatch `|M(u) - M(u*)| / M(u*)`.
pub fn mass_mismatch(u: &[f64], eq: &Equilibrium) -> f64 {
    let m = eq.grid.integrate(u);
    let ms = eq.mass();
    (m - ms).abs() / ms
}

/// Relative free energy. A mass mismatch above `1e-8` is logged, not fatal.
pub fn relative_entropy(u: &[f64], eq: &Equilibrium) -> Result<f64> {
    check_positive(u)?;
    let mm = mass_mismatch(u, eq);
    if mm > 1e-8 {
        log::warn!("relative entropy evaluated with mass mismatch {mm:.3e}");
    }
    let e = &eq.profile.exponents;
    Ok(eq
        .grid
        .volumes
        .iter()
        .zip(u.iter().zip(&eq.u))
        .map(|(w, (&x, &s))| w * bregman(e, x, s))
        .sum())
}

/// Edge differences of `psi = F'(u) - F'(u*)` divided by the center spacing.
fn psi_gradients(u: &[f64], eq: &Equilibrium) -> Vec<f64> {
    let psi: Vec<f64> = u.iter().enumerate().map(|(i, &x)| eq.psi(i, x)).collect();
    psi.windows(2)
        .zip(&eq.grid.spacing)
        .map(|(p, dr)| (p[1] - p[0]) / dr)
        .collect()
}

/// Relative Fisher information
/// `int u (grad psi) . (grad c*(grad F'(u)) - grad c*(grad F'(u*)))`,
/// with the mobility of the solver (`eps_reg = 0` gives the exact integrand).
pub fn fisher_information(u: &[f64], eq: &Equilibrium, mobility: &Mobility) -> Result<f64> {
    check_positive(u)?;
    let grid = &eq.grid;
    let dpsi = psi_gradients(u, eq);
    let mut sum = 0.0;
    for (k, d) in dpsi.iter().enumerate() {
        let s = eq.sigma[k] + d;
        let avg = 0.5 * (u[k] + u[k + 1]);
        let vol = grid.areas[k] * grid.spacing[k];
        sum += vol * avg * d * (mobility.g(s) - mobility.g(eq.sigma[k]));
    }
    Ok(sum)
}

/// `nu_eps` density at each interior edge.
pub fn edge_nu(eq: &Equilibrium, eps: f64) -> Result<Vec<f64>> {
    let e = &eq.profile.exponents;
    if e.p < 2.0 && !(eps >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must be >= 0",
        });
    }
    Ok((0..eq.u_edge.len())
        .map(|k| {
            let r = eq.grid.edge_radius(k);
            eq.u_edge[k] * (eps + r.powf(e.q - 1.0)).powf(e.p - 2.0)
        })
        .collect())
}

/// Edge stiffness `A_e nu_eps(r_e) / dR_e`; the quadratic form
/// `sum_e k_e (g_{e+1} - g_e)^2` is `int |grad g|^2 d nu_eps`.
pub fn edge_stiffness(eq: &Equilibrium, eps: f64) -> Result<Vec<f64>> {
    let nu = edge_nu(eq, eps)?;
    Ok(nu
        .iter()
        .enumerate()
        .map(|(k, w)| eq.grid.areas[k] * w / eq.grid.spacing[k])
        .collect())
}

fn require_eps(e: &Exponents, eps: f64) -> Result<()> {
    if e.p < 2.0 && !(eps > 0.0) {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must be > 0 when p < 2",
        });
    }
    if eps < 0.0 {
        return Err(Error::InvalidParameter {
            name: "eps",
            value: eps,
            reason: "must be >= 0",
        });
    }
    Ok(())
}

/// Mass-neutrality test for a perturbation `v`.
pub fn check_zero_mean(v: &[f64], eq: &Equilibrium) -> Result<()> {
    let integral = eq.grid.integrate(v);
    let abs: f64 = eq
        .grid
        .volumes
        .iter()
        .zip(v)
        .map(|(w, x)| w * x.abs())
        .sum();
    let scale = 1e-8 * abs + 1e-12 * eq.mass();
    if integral.abs() > scale {
        return Err(Error::NonZeroMean { integral, scale });
    }
    Ok(())
}

/// Linearized relative entropy `(1/2) int v^2 F''(u*)`.
pub fn linear_entropy(v: &[f64], eq: &Equilibrium) -> f64 {
    0.5 * eq
        .grid
        .volumes
        .iter()
        .zip(v.iter().zip(&eq.f2))
        .map(|(w, (x, f))| w * x * x * f)
        .sum::<f64>()
}

/// `G = v F''(u*)` and its edge gradients.
fn linear_gradients(v: &[f64], eq: &Equilibrium) -> Vec<f64> {
    let g: Vec<f64> = v.iter().zip(&eq.f2).map(|(a, b)| a * b).collect();
    g.windows(2)
        .zip(&eq.grid.spacing)
        .map(|(p, dr)| (p[1] - p[0]) / dr)
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFisher {
    pub i_lin: f64,
    pub i0_lin: f64,
    /// Radius of the ball around the origin not covered by any edge cell;
    /// nonzero only when the plain weight is singular there (p < 2).
    pub excluded_radius: f64,
}

/// Linearized Fisher informations `I[v]` and `I_0[v]`.
pub fn linear_fisher(v: &[f64], eq: &Equilibrium) -> Result<LinearFisher> {
    check_zero_mean(v, eq)?;
    let e = &eq.profile.exponents;
    let grid = &eq.grid;
    let dg = linear_gradients(v, eq);
    let (mut i, mut i0) = (0.0, 0.0);
    for (k, w) in dg.iter().enumerate() {
        let r = grid.edge_radius(k);
        let vol = grid.areas[k] * grid.spacing[k];
        // A = grad c = r^{q-1} e_r, W = w e_r
        let a = r.powf(e.q - 1.0);
        i += vol * eq.u_edge[k] * a.powf(e.p - 2.0) * w * w;
        let aw = a * w;
        i0 += vol * eq.u_edge[k] * a.powf(e.p - 4.0) * aw * aw;
    }
    Ok(LinearFisher {
        i_lin: i,
        i0_lin: i0,
        excluded_radius: if e.p < 2.0 { grid.centers[0] } else { 0.0 },
    })
}

/// `I^(eps)[v] = int |grad(v F''(u*))|^2 d nu_eps`.
pub fn eps_linear_fisher(v: &[f64], eq: &Equilibrium, eps: f64) -> Result<f64> {
    require_eps(&eq.profile.exponents, eps)?;
    let k = edge_stiffness(eq, eps)?;
    let dg = linear_gradients(v, eq);
    Ok(k.iter()
        .zip(&dg)
        .zip(&eq.grid.spacing)
        .map(|((k, w), dr)| k * (w * dr) * (w * dr))
        .sum())
}

/// `I_gamma^(eps)[u] = int |grad(F'(u) - F'(u*))|^2 d nu_eps`.
pub fn gamma_eps_fisher(u: &[f64], eq: &Equilibrium, eps: f64) -> Result<f64> {
    require_eps(&eq.profile.exponents, eps)?;
    check_positive(u)?;
    let k = edge_stiffness(eq, eps)?;
    let d = psi_gradients(u, eq);
    Ok(k.iter()
        .zip(&d)
        .zip(&eq.grid.spacing)
        .map(|((k, w), dr)| k * (w * dr) * (w * dr))
        .sum())
}

/// Max over edges of `Phi_eps = |grad F'(u)| / (eps + |grad F'(u*)|)`.
pub fn phi_eps_max(u: &[f64], eq: &Equilibrium, eps: f64) -> f64 {
    psi_gradients(u, eq)
        .iter()
        .zip(&eq.sigma)
        .map(|(d, s)| (s + d).abs() / (eps + s.abs()))
        .fold(0.0, f64::max)
}

/// Max over cells with `r > 1` of `r |d_r w| / w`, `w = u/u*`.
pub fn gradient_quotient_max(u: &[f64], eq: &Equilibrium) -> f64 {
    let grid = &eq.grid;
    let w: Vec<f64> = u.iter().zip(&eq.u).map(|(a, b)| a / b).collect();
    (0..w.len() - 1)
        .filter(|&k| grid.edge_radius(k) > 1.0)
        .map(|k| {
            let r = grid.edge_radius(k);
            let dw = (w[k + 1] - w[k]) / grid.spacing[k];
            r * dw.abs() / (0.5 * (w[k] + w[k + 1]))
        })
        .fold(0.0, f64::max)
}

/// `||u - u*||_1^2 / E[u|u*]`; `None` at equilibrium where it is undefined.
pub fn ck_ratio(u: &[f64], eq: &Equilibrium) -> Result<Option<f64>> {
    let ent = relative_entropy(u, eq)?;
    if !(ent > 0.0) {
        return Ok(None);
    }
    let l1: f64 = eq
        .grid
        .volumes
        .iter()
        .zip(u.iter().zip(&eq.u))
        .map(|(w, (a, b))| w * (a - b).abs())
        .sum();
    Ok(Some(l1 * l1 / ent))
}

/// Divergence of `x |x|^{q-2} (eps + |x|^{q-1})^{p-2}` at radius `r`:
/// `r^{q-2} (eps + t)^{p-3} ((n+q-2) eps + n t)` with `t = r^{q-1}`.
pub fn div_weight(r: f64, eps: f64, e: &Exponents) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain {
            op: "div_weight",
            detail: format!("r = {r} must be positive"),
        });
    }
    let (n, q, p) = (e.nf(), e.q, e.p);
    let t = r.powf(q - 1.0);
    Ok(r.powf(q - 2.0) * (eps + t).powf(p - 3.0) * ((n + q - 2.0) * eps + n * t))
}

/// `f_p(r, x) = (1 + r^p - (r + r^{p-1}) x) / (1 + r^2 - 2 r x)`.
pub fn fp_ratio(r: f64, x: f64, p: f64) -> Result<f64> {
    let den = 1.0 + r * r - 2.0 * r * x;
    if den == 0.0 {
        return Err(Error::Domain {
            op: "fp_ratio",
            detail: format!("singular at (r, x) = ({r}, {x})"),
        });
    }
    Ok((1.0 + r.powf(p) - (r + r.powf(p - 1.0)) * x) / den)
}

/// `H[u|u*] / |grad F'(u*)|^{p-2}` at interior edge `k`, together with the
/// reduced coordinates `(|b|, cos theta)` of `grad F'(u) / |grad F'(u*)|`.
pub fn h_ratio(u: &[f64], eq: &Equilibrium, k: usize) -> Result<(f64, f64, f64)> {
    let e = &eq.profile.exponents;
    if !(e.p > 2.0) {
        return Err(Error::Domain {
            op: "H_ratio",
            detail: format!("requires p > 2, got {}", e.p),
        });
    }
    let d = (eq.psi(k + 1, u[k + 1]) - eq.psi(k, u[k])) / eq.grid.spacing[k];
    if d == 0.0 {
        return Err(Error::Domain {
            op: "H_ratio",
            detail: format!("grad(F'(u) - F'(u*)) vanishes at edge {k}"),
        });
    }
    let y = eq.sigma[k];
    let x = y + d;
    let plain = Mobility {
        p: e.p,
        eps_reg: 0.0,
    };
    let h = d * (plain.g(x) - plain.g(y)) / (d * d);
    let ratio = h / y.abs().powf(e.p - 2.0);
    let b = x.abs() / y.abs();
    let cos = if x == 0.0 { 0.0 } else { (x * y).signum() };
    Ok((ratio, b, cos))
}

/// Constants of the comparison lemmas for a quotient range `[W0, W1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComparisonConstants {
    pub w0: f64,
    pub w1: f64,
    pub alpha0: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub kappa0: f64,
    pub kappa2: f64,
    /// Bound on `|div(x|x|^{q-2}(eps+|x|^{q-1})^{p-2})|`.
    pub divbound: f64,
    /// `C_low E_lin <= E_rel <= C_high E_lin`.
    pub c_low: f64,
    pub c_high: f64,
    /// Claim-2 constant `I_gamma <= delta I_rel`, once `eta` is known.
    pub delta: Option<f64>,
    pub eta: Option<f64>,
}

/// `(w - 1)/h_gamma(w)`, equal to 1 at `w = 1`.
fn h_ratio_2_gamma(w: f64, g: f64) -> f64 {
    let d = w - 1.0;
    if d.abs() < 1e-8 {
        // h_gamma(w) = d + (g-2) d^2/2 + ...
        return 1.0 / (1.0 + 0.5 * (g - 2.0) * d);
    }
    d / h_k(w, g)
}

impl ComparisonConstants {
    pub fn from_range(e: &Exponents, w0: f64, w1: f64) -> Result<Self> {
        if !(w0 > 0.0 && w0 <= 1.0 && w1 >= 1.0 && w1.is_finite()) {
            return Err(Error::Domain {
                op: "comparison constants",
                detail: format!("need 0 < W0 <= 1 <= W1, got [{w0}, {w1}]"),
            });
        }
        let g = e.gamma;
        let alpha0 = h_ratio_2_gamma(w0, g).powi(2);
        let alpha1 = h_ratio_2_gamma(w1, g).powi(2);
        let alpha2 = w1.powf(2.0 * (2.0 - g));
        let kappa0 = alpha1.max(alpha2);
        let divbound = e.nf().max(e.nf() + 2.0 * (e.q - 2.0));
        let kappa2 = 2.0 * (kappa0 / alpha0 - 1.0) * (1.0 - g) * divbound;
        Ok(ComparisonConstants {
            w0,
            w1,
            alpha0,
            alpha1,
            alpha2,
            kappa0,
            kappa2,
            divbound,
            c_low: w1.powf(g - 2.0),
            c_high: w0.powf(g - 2.0),
            delta: None,
            eta: None,
        })
    }

    /// Attach a measured bound `eta >= Phi_eps` and derive the Claim-2 constant.
    pub fn with_eta(mut self, e: &Exponents, eta: f64) -> Self {
        let (p, q, n, g) = (e.p, e.q, e.nf(), e.gamma);
        let delta = if p < 2.0 {
            (p * eta.powf(2.0 - p))
                .max(q)
                .max(2.0 * g * self.divbound / n)
                / self.w0
        } else if p == 2.0 {
            1.0 / self.w0
        } else {
            // f_p >= 1/2 on the whole (r, x) range
            2.0 / self.w0
        };
        self.eta = Some(eta);
        self.delta = Some(delta);
        self
    }

    /// `kappa1 = delta kappa0`.
    pub fn kappa1(&self) -> Option<f64> {
        self.delta.map(|d| d * self.kappa0)
    }

    /// `(2 - kappa2 beta)/(C_high kappa1 beta)`, or `None` while `kappa2 beta >= 2`.
    pub fn lambda_theo(&self, beta_tilde: f64) -> Option<f64> {
        let k1 = self.kappa1()?;
        let slack = 2.0 - self.kappa2 * beta_tilde;
        if slack <= 0.0 {
            return None;
        }
        Some(slack / (self.c_high * k1 * beta_tilde))
    }
}

/// Constants for the sandwich hypothesis itself.
pub fn claim1_constants(e: &Exponents, bounds: &SandwichBounds) -> Result<ComparisonConstants> {
    ComparisonConstants::from_range(e, bounds.w0, bounds.w1)
}

/// All per-snapshot functionals in one pass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FunctionalSample {
    pub e_rel: f64,
    pub i_rel: f64,
    pub e_lin: f64,
    pub i_lin: f64,
    pub i0_lin: f64,
    pub i_eps: f64,
    pub i_gamma_eps: f64,
    pub eps: f64,
    pub ck_ratio: Option<f64>,
}

pub fn sample(
    u: &[f64],
    eq: &Equilibrium,
    mobility: &Mobility,
    eps: f64,
) -> Result<FunctionalSample> {
    let v: Vec<f64> = u.iter().zip(&eq.u).map(|(a, b)| a - b).collect();
    let lf = linear_fisher(&v, eq)?;
    Ok(FunctionalSample {
        e_rel: relative_entropy(u, eq)?,
        i_rel: fisher_information(u, eq, mobility)?,
        e_lin: linear_entropy(&v, eq),
        i_lin: lf.i_lin,
        i0_lin: lf.i0_lin,
        i_eps: eps_linear_fisher(&v, eq, eps)?,
        i_gamma_eps: gamma_eps_fisher(u, eq, eps)?,
        eps,
        ck_ratio: ck_ratio(u, eq)?,
    })
}
