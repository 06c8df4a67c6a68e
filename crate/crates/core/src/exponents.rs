//! Exponent algebra for the triple (m, p, n).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance from 1 below which gamma is treated as the logarithmic case.
const GAMMA_ONE_TOL: f64 = 1e-12;

/// Where `m` sits relative to the studied interval `m_c < m < (n-p+1)/(n(p-1))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RangeClass {
    InRange,
    DisplacementConvex,
    MassLosing,
}

/// Validated exponent bundle. All derived constants are frozen at construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Exponents {
    pub m: f64,
    pub p: f64,
    pub n: usize,
    pub q: f64,
    pub gamma: f64,
    pub m_c: f64,
    pub p_c: f64,
    pub delta_p: f64,
    pub alpha: f64,
    pub theta: f64,
    /// `None` when `n = q`, where the formula has a pole.
    pub m_star: Option<f64>,
}

impl Exponents {
    pub fn derive(m: f64, p: f64, n: usize) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::InvalidParameter {
                name: "p",
                value: p,
                reason: "must be > 1",
            });
        }
        if n < 3 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "dimension must be >= 3",
            });
        }
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter {
                name: "m",
                value: m,
                reason: "must be > 0",
            });
        }
        let nf = n as f64;
        let q = conjugate(p);
        let gamma = gamma_of(m, p);
        if (gamma - 1.0).abs() < GAMMA_ONE_TOL {
            return Err(Error::LogarithmicCase { m, p });
        }
        let m_c = critical_m(p, nf);
        let delta_p = delta_p_scaling(m, p, nf);
        let alpha = alpha_weight(q, gamma);
        let m_star = if (nf - q).abs() < 1e-14 {
            None
        } else {
            Some((nf - 2.0 * q) / (nf - q) + (2.0 - p) / (p - 1.0))
        };
        let e = Exponents {
            m,
            p,
            n,
            q,
            gamma,
            m_c,
            p_c: 2.0 * nf / (nf + 1.0),
            delta_p,
            alpha,
            theta: theta(nf, q, gamma),
            m_star,
        };
        debug_assert!(close(e.delta_p, delta_p_rescaling(m, p, nf), 1e-12));
        debug_assert!(close(e.alpha, alpha_split(q, gamma), 1e-12));
        Ok(e)
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// Upper end `(n-p+1)/(n(p-1))` of the studied interval.
    pub fn m_upper(&self) -> f64 {
        (self.nf() - self.p + 1.0) / (self.nf() * (self.p - 1.0))
    }

    pub fn classify(&self) -> RangeClass {
        if self.m <= self.m_c {
            RangeClass::MassLosing
        } else if self.m >= self.m_upper() {
            RangeClass::DisplacementConvex
        } else {
            RangeClass::InRange
        }
    }

    /// `1/(gamma-1) + n/q`: Barenblatt mass scales as `D` to this power.
    pub fn mass_exponent(&self) -> f64 {
        1.0 / (self.gamma - 1.0) + self.nf() / self.q
    }

    /// Coefficient `(1-gamma)/(m q)` in front of `r^q` inside the profile.
    pub fn profile_coeff(&self) -> f64 {
        (1.0 - self.gamma) / (self.m * self.q)
    }

    /// Surface area of the unit sphere in R^n.
    pub fn sphere_area(&self) -> f64 {
        sphere_area(self.n)
    }

    /// Second formula for `delta_p`, kept separate for the identity check.
    pub fn delta_p_alt(&self) -> f64 {
        delta_p_rescaling(self.m, self.p, self.nf())
    }

    pub fn alpha_alt(&self) -> f64 {
        alpha_split(self.q, self.gamma)
    }
}

/// Hölder conjugate `p/(p-1)`.
pub fn conjugate(p: f64) -> f64 {
    p / (p - 1.0)
}

pub fn gamma_of(m: f64, p: f64) -> f64 {
    m + (p - 2.0) / (p - 1.0)
}

pub fn critical_m(p: f64, n: f64) -> f64 {
    (n - p) / (n * (p - 1.0))
}

/// `n(p-1)(m - m_c)`.
pub fn delta_p_scaling(m: f64, p: f64, n: f64) -> f64 {
    n * (p - 1.0) * (m - critical_m(p, n))
}

/// `(p-1)(nm+1) + 1 - n`.
pub fn delta_p_rescaling(m: f64, p: f64, n: f64) -> f64 {
    (p - 1.0) * (n * m + 1.0) + 1.0 - n
}

/// `1 + q(2-gamma)/(2(gamma-1))`.
pub fn alpha_weight(q: f64, gamma: f64) -> f64 {
    1.0 + q * (2.0 - gamma) / (2.0 * (gamma - 1.0))
}

/// `(2-q)/2 + q/(2(gamma-1))`.
pub fn alpha_split(q: f64, gamma: f64) -> f64 {
    (2.0 - q) / 2.0 + q / (2.0 * (gamma - 1.0))
}

/// Tail-integrability exponent `n(1-gamma)/(q(2-gamma))`.
pub fn theta(n: f64, q: f64, gamma: f64) -> f64 {
    n * (1.0 - gamma) / (q * (2.0 - gamma))
}

pub fn sphere_area(n: usize) -> f64 {
    // 2 pi^{n/2} / Gamma(n/2), with Gamma at half-integers by recursion.
    let mut g = if n % 2 == 0 {
        1.0
    } else {
        std::f64::consts::PI.sqrt()
    };
    let mut x = if n % 2 == 0 { 1.0 } else { 0.5 };
    while x < n as f64 / 2.0 - 1e-9 {
        g *= x;
        x += 1.0;
    }
    2.0 * std::f64::consts::PI.powf(n as f64 / 2.0) / g
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn logarithmic_case_rejected() {
        let err = Exponents::derive(1.0, 2.0, 3).unwrap_err();
        assert!(matches!(err, Error::LogarithmicCase { .. }));
        assert!((critical_m(2.0, 3.0) - 1.0 / 3.0).abs() < 1e-15);
        assert!((2.0 * 3.0 / 4.0_f64 - 1.5).abs() < 1e-15);
    }

    #[test]
    fn canonical_fast_diffusion_values() {
        let e = Exponents::derive(4.0 / 3.0, 1.5, 3).unwrap();
        // Rational arithmetic by hand: q = 3, gamma = 4/3 - 1 = 1/3,
        // m_c = 3/2 / (3/2) = 1, delta = 3/2 (4/3 - 1) = 1/2,
        // alpha = 1 + 3 (5/3) / (2 (-2/3)) = -11/4, theta = 3 (2/3) / (3 (5/3)) = 2/5.
        assert!((e.q - 3.0).abs() < 1e-14);
        assert!((e.gamma - 1.0 / 3.0).abs() < 1e-14);
        assert!((e.m_c - 1.0).abs() < 1e-14);
        assert!((e.delta_p - 0.5).abs() < 1e-14);
        assert!((e.alpha + 11.0 / 4.0).abs() < 1e-13);
        assert!((e.theta - 0.4).abs() < 1e-14);
        assert!((e.p_c - 1.5).abs() < 1e-15);
        assert!(e.m_star.is_none());
        assert_eq!(e.classify(), RangeClass::InRange);
        assert!((e.m_upper() - 5.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn canonical_slow_gradient_values() {
        let e = Exponents::derive(0.1, 3.0, 3).unwrap();
        assert!((e.q - 1.5).abs() < 1e-14);
        assert!((e.gamma - 0.6).abs() < 1e-14);
        assert!(e.m_c.abs() < 1e-15);
        assert!((e.delta_p - 0.6).abs() < 1e-14);
        assert_eq!(e.classify(), RangeClass::InRange);
        assert!((e.m_upper() - 1.0 / 6.0).abs() < 1e-14);
    }

    #[test]
    fn classification_boundaries() {
        let e = Exponents::derive(1.0, 1.5, 3).unwrap();
        assert_eq!(e.classify(), RangeClass::MassLosing);
        let e = Exponents::derive(2.0, 2.0, 3).unwrap();
        assert_eq!(e.classify(), RangeClass::DisplacementConvex);
    }

    #[test]
    fn invalid_inputs_rejected() {
        assert!(Exponents::derive(1.0, 1.0, 3).is_err());
        assert!(Exponents::derive(1.0, 1.5, 2).is_err());
        assert!(Exponents::derive(0.0, 1.5, 3).is_err());
        assert!(Exponents::derive(f64::NAN, 1.5, 3).is_err());
    }

    #[test]
    fn sphere_areas() {
        use std::f64::consts::PI;
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_area(4) - 2.0 * PI * PI).abs() < 1e-12);
        assert!((sphere_area(5) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
    }

    #[test]
    fn quadratic_gradient_regime() {
        for &n in &[3usize, 4, 5] {
            let nf = n as f64;
            let m = 1.0 - 2.0 / nf + 0.05;
            let e = Exponents::derive(m, 2.0, n).unwrap();
            assert!((e.q - 2.0).abs() < 1e-15);
            assert!((e.gamma - m).abs() < 1e-15);
            assert!((e.m_c - (1.0 - 2.0 / nf)).abs() < 1e-14);
            assert!((e.delta_p - (nf * (m - 1.0) + 2.0)).abs() < 1e-13);
        }
    }

    #[test]
    fn theta_at_critical_exponent() {
        for &n in &[3usize, 4, 6] {
            for &p in &[1.3, 1.5, 2.5] {
                let nf = n as f64;
                let q = conjugate(p);
                let g = gamma_of(critical_m(p, nf), p);
                assert!((theta(nf, q, g) - nf / (nf + q)).abs() < 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn in_range_invariants(p in 1.05f64..4.0, n in 3usize..8, t in 0.01f64..0.99) {
            let nf = n as f64;
            let mc = critical_m(p, nf);
            let up = (nf - p + 1.0) / (nf * (p - 1.0));
            let m = mc + t * (up - mc);
            prop_assume!(m > 0.0);
            let e = match Exponents::derive(m, p, n) {
                Ok(e) => e,
                Err(Error::LogarithmicCase { .. }) => return Ok(()),
                Err(err) => panic!("{err}"),
            };
            prop_assert_eq!(e.classify(), RangeClass::InRange);
            prop_assert!((1.0 / e.p + 1.0 / e.q - 1.0).abs() < 1e-14);
            prop_assert!(e.delta_p > 0.0);
            prop_assert!(e.gamma < 1.0 - 1.0 / nf);
            prop_assert!(e.theta < 1.0);
            prop_assert!(e.alpha < -(nf - 2.0) / 2.0);
            prop_assert!(close(e.delta_p, e.delta_p_alt(), 1e-12));
            prop_assert!(close(e.alpha, e.alpha_alt(), 1e-12));
            prop_assert!(e.mass_exponent() < 0.0);
        }

        #[test]
        fn theta_decreasing_in_m(p in 1.1f64..3.5, t in 0.02f64..0.95) {
            let n = 3.0;
            let mc = critical_m(p, n);
            let up = (n - p + 1.0) / (n * (p - 1.0));
            let m = mc + t * (up - mc);
            let h = 1e-4 * (up - mc);
            let q = conjugate(p);
            let lo = theta(n, q, gamma_of(m, p));
            let hi = theta(n, q, gamma_of(m + h, p));
            prop_assert!(hi < lo);
        }
    }
}
