//! Barenblatt profiles, the nonlinearity F, the costs c and c*, and the
//! weights mu, nu, nu_eps built from a profile.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::quad;

/// D-term to c-term ratio at which quadrature hands over to the tail series.
const TAIL_SWITCH: f64 = 1e-8;

/// `F(x)`, `F'(x)` or `F''(x)` for `order` 0, 1, 2.
pub fn f_eval(e: &Exponents, x: f64, order: u8) -> Result<f64> {
    if !(x > 0.0) || !x.is_finite() {
        return Err(Error::Domain {
            op: "F",
            detail: format!("x = {x} must be positive and finite"),
        });
    }
    let (m, g) = (e.m, e.gamma);
    let v = match order {
        0 => m * x.powf(g) / (g * (g - 1.0)),
        1 => m * x.powf(g - 1.0) / (g - 1.0),
        2 => m * x.powf(g - 2.0),
        _ => {
            return Err(Error::Domain {
                op: "F",
                detail: format!("derivative order {order} not in 0..=2"),
            })
        }
    };
    if !v.is_finite() {
        return Err(Error::Domain {
            op: "F",
            detail: format!("overflow at x = {x}, order {order}"),
        });
    }
    Ok(v)
}

fn norm(z: &[f64]) -> f64 {
    z.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// `c(z) = |z|^q / q`.
pub fn cost_c(e: &Exponents, z: &[f64]) -> f64 {
    norm(z).powf(e.q) / e.q
}

/// `c*(z) = |z|^p / p`.
pub fn cost_c_star(e: &Exponents, z: &[f64]) -> f64 {
    norm(z).powf(e.p) / e.p
}

/// `grad c(z) = z |z|^{q-2}`, zero at the origin.
pub fn grad_c(e: &Exponents, z: &[f64]) -> Vec<f64> {
    scaled_power(z, e.q)
}

/// `grad c*(z) = z |z|^{p-2}`, extended by 0 at the origin.
pub fn grad_c_star(e: &Exponents, z: &[f64]) -> Vec<f64> {
    scaled_power(z, e.p)
}

fn scaled_power(z: &[f64], s: f64) -> Vec<f64> {
    let r = norm(z);
    if r == 0.0 {
        return vec![0.0; z.len()];
    }
    let f = r.powf(s - 2.0);
    z.iter().map(|v| v * f).collect()
}

/// `u_D(r) = (D + (1-gamma)/(m q) r^q)^{1/(gamma-1)}`.
pub fn profile_value(e: &Exponents, d: f64, r: f64) -> f64 {
    (d + e.profile_coeff() * r.powf(e.q)).powf(1.0 / (e.gamma - 1.0))
}

/// Mass of `u_D` outside the ball of radius `r`, from the binomial series of
/// `(k r^q + D)^beta`. Requires `D < k r^q`.
pub fn tail_mass(e: &Exponents, d: f64, r: f64) -> Result<f64> {
    let k = e.profile_coeff();
    let (q, nf) = (e.q, e.nf());
    let beta = 1.0 / (e.gamma - 1.0);
    let t = d / (k * r.powf(q));
    if !(t < 1.0) {
        return Err(Error::Domain {
            op: "tail_mass",
            detail: format!("series needs D < k r^q, ratio = {t}"),
        });
    }
    // sum_j binom(beta, j) t^j  *  k^beta r^{n + q beta - j q}/(-(n + q(beta - j)))
    let lead = k.powf(beta) * r.powf(nf + q * beta);
    let mut binom = 1.0;
    let mut tj = 1.0;
    let mut sum = 0.0;
    for j in 0..200 {
        let jf = j as f64;
        let expo = nf + q * (beta - jf);
        let term = binom * tj / (-expo);
        sum += term;
        if term.abs() < 1e-18 * sum.abs() {
            break;
        }
        binom *= (beta - jf) / (jf + 1.0);
        tj *= t;
    }
    Ok(e.sphere_area() * lead * sum)
}

/// Radius beyond which the `D`-term is `TAIL_SWITCH` times the `c`-term.
fn tail_radius(e: &Exponents, d: f64) -> f64 {
    (d / (TAIL_SWITCH * e.profile_coeff())).powf(1.0 / e.q)
}

/// Total mass `M(D)` by adaptive radial quadrature plus the analytic tail.
pub fn profile_mass(e: &Exponents, d: f64) -> Result<f64> {
    let kappa = e.mass_exponent();
    if kappa >= 0.0 {
        return Err(Error::DivergentMass { exponent: kappa });
    }
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::InvalidParameter {
            name: "D",
            value: d,
            reason: "must be positive",
        });
    }
    let sigma = e.sphere_area();
    let n1 = e.nf() - 1.0;
    let f = |r: f64| sigma * r.powf(n1) * profile_value(e, d, r);
    let scale = (d / e.profile_coeff()).powf(1.0 / e.q);
    let r_cut = tail_radius(e, d);
    let mut a = 0.0;
    let mut b = scale * 2f64.powi(-10);
    let mut total = 0.0;
    while a < r_cut {
        let hi = b.min(r_cut);
        total += quad::integrate(&f, a, hi, 1e-14, 0.0);
        a = hi;
        b = hi * 2.0;
    }
    let m = total + tail_mass(e, d, r_cut)?;
    if !m.is_finite() || m <= 0.0 {
        return Err(Error::NonFinite {
            context: "profile mass",
            tau: 0.0,
        });
    }
    Ok(m)
}

/// A Barenblatt profile `u_D` with cached mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BarenblattProfile {
    pub exponents: Exponents,
    pub d: f64,
    pub mass: f64,
}

impl BarenblattProfile {
    pub fn new(e: Exponents, d: f64) -> Result<Self> {
        let mass = profile_mass(&e, d)?;
        Ok(BarenblattProfile {
            exponents: e,
            d,
            mass,
        })
    }

    pub fn eval(&self, r: f64) -> f64 {
        profile_value(&self.exponents, self.d, r)
    }

    /// `F'(u_D(r)) = m D/(gamma-1) - r^q/q`, exact.
    pub fn f_prime(&self, r: f64) -> f64 {
        let e = &self.exponents;
        e.m * self.d / (e.gamma - 1.0) - r.powf(e.q) / e.q
    }

    /// Density of `mu`, i.e. `1/F''(u_D)`.
    pub fn mu_density(&self, r: f64) -> f64 {
        let e = &self.exponents;
        (self.d + e.profile_coeff() * r.powf(e.q)).powf((2.0 - e.gamma) / (e.gamma - 1.0)) / e.m
    }

    /// Density of `nu_eps`: `u_D(r) (eps + r^{q-1})^{p-2}`; `eps = 0` gives `nu`.
    pub fn nu_density(&self, r: f64, eps: f64) -> Result<f64> {
        let e = &self.exponents;
        if eps < 0.0 {
            return Err(Error::InvalidParameter {
                name: "eps",
                value: eps,
                reason: "must be >= 0",
            });
        }
        if eps == 0.0 && e.p < 2.0 && r == 0.0 {
            return Err(Error::SingularWeight { p: e.p });
        }
        Ok(self.eval(r) * (eps + r.powf(e.q - 1.0)).powf(e.p - 2.0))
    }

    /// Far-field asymptote of `mu_density`: const * r^{2 alpha - 2}.
    pub fn mu_far_field(&self, r: f64) -> f64 {
        let e = &self.exponents;
        e.profile_coeff().powf((2.0 - e.gamma) / (e.gamma - 1.0)) / e.m
            * r.powf(2.0 * e.alpha - 2.0)
    }

    /// Far-field asymptote of `nu_density` at `eps = 0`: const * r^{2 alpha}.
    pub fn nu_far_field(&self, r: f64) -> f64 {
        let e = &self.exponents;
        e.profile_coeff().powf(1.0 / (e.gamma - 1.0)) * r.powf(2.0 * e.alpha)
    }

    /// Radius outside which the mass is below `rel * mass`.
    pub fn radius_for_tail(&self, rel: f64) -> Result<f64> {
        let e = &self.exponents;
        let mut lo = 2.0 * (self.d / e.profile_coeff()).powf(1.0 / e.q);
        let target = rel * self.mass;
        let mut hi = lo;
        while tail_mass(e, self.d, hi)? > target {
            hi *= 2.0;
        }
        if tail_mass(e, self.d, lo)? <= target {
            return Ok(lo);
        }
        for _ in 0..100 {
            let mid = (lo * hi).sqrt();
            if tail_mass(e, self.d, mid)? > target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(hi)
    }
}

/// Profile of prescribed mass, from the scaling law and a polish against quadrature.
pub fn solve_dstar(e: &Exponents, target_mass: f64) -> Result<BarenblattProfile> {
    if !(target_mass > 0.0) || !target_mass.is_finite() {
        return Err(Error::InvalidParameter {
            name: "target_mass",
            value: target_mass,
            reason: "must be positive",
        });
    }
    let kappa = e.mass_exponent();
    let m1 = profile_mass(e, 1.0)?;
    let mut d = (target_mass / m1).powf(1.0 / kappa);
    let mut b = BarenblattProfile::new(*e, d)?;
    for _ in 0..4 {
        if ((b.mass - target_mass) / target_mass).abs() < 1e-12 {
            break;
        }
        d *= (target_mass / b.mass).powf(1.0 / kappa);
        b = BarenblattProfile::new(*e, d)?;
    }
    if ((b.mass - target_mass) / target_mass).abs() >= 1e-10 {
        return Err(Error::NonConvergence {
            what: "D* polish",
            iterations: 4,
        });
    }
    Ok(b)
}

/// `(D0, D1, D*)` together with the quotient bounds `W0 <= 1 <= W1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SandwichBounds {
    pub d0: f64,
    pub d1: f64,
    pub dstar: f64,
    pub w0: f64,
    pub w1: f64,
}

impl SandwichBounds {
    pub fn new(e: &Exponents, d0: f64, d1: f64, dstar: f64) -> Result<Self> {
        if !(d1 > 0.0 && dstar >= d1 && d0 >= dstar) {
            return Err(Error::SandwichOrdering { d0, dstar, d1 });
        }
        let s = 1.0 / (1.0 - e.gamma);
        Ok(SandwichBounds {
            d0,
            d1,
            dstar,
            w0: (dstar / d0).powf(s),
            w1: (dstar / d1).powf(s),
        })
    }
}
