use std::fmt;
use std::sync::Arc;

use crate::barenblatt::{profile_value, BarenblattProfile, SandwichBounds};
use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::solver::equilibrium::Equilibrium;
use crate::solver::grid::RadialGrid;
use crate::solver::stepper::DensityField;

/// How the profile parameter `D(r)` moves between `D0` and `D1` across space.
/// The initial datum is `u0(r) = u_{D(r)}(r)`.
#[derive(Clone)]
pub enum Shape {
    /// `D(r) = D0`; the datum is itself a Barenblatt profile.
    Equilibrium,
    /// `D0` inside `radius`, `D1` outside, blended by `tanh((r - radius)/width)`.
    Step { radius: f64, width: f64 },
    /// `D1` background with a Gaussian excursion to `D0` around `center`.
    Bump { center: f64, width: f64 },
    /// Arbitrary `r -> D(r)`; must stay in `[D1, D0]`.
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Shape::Equilibrium => write!(f, "Equilibrium"),
            Shape::Step { radius, width } => {
                write!(f, "Step {{ radius: {radius}, width: {width} }}")
            }
            Shape::Bump { center, width } => {
                write!(f, "Bump {{ center: {center}, width: {width} }}")
            }
            Shape::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Shape {
    fn parameter(&self, d0: f64, d1: f64, r: f64) -> f64 {
        match self {
            Shape::Equilibrium => d0,
            Shape::Step { radius, width } => {
                d1 + (d0 - d1) * 0.5 * (1.0 - ((r - radius) / width).tanh())
            }
            Shape::Bump { center, width } => {
                let z = (r - center) / width;
                d1 + (d0 - d1) * (-z * z).exp()
            }
            Shape::Custom(f) => f(r),
        }
    }
}

/// Sandwiched initial datum together with its mass-matched equilibrium.
#[derive(Debug, Clone)]
pub struct InitialData {
    pub field: DensityField,
    pub mass: f64,
    pub bounds: SandwichBounds,
    pub equilibrium: Equilibrium,
}

/// Build `u0` on `grid`, check `u_{D0} <= u0 <= u_{D1}` cell by cell, and pick
/// `D*` so that the sampled profile `u_{D*}(r_i)` carries the same discrete mass.
pub fn build_initial_data(
    e: &Exponents,
    d0: f64,
    d1: f64,
    grid: Arc<RadialGrid>,
    shape: &Shape,
) -> Result<InitialData> {
    if !(d1 > 0.0) || !(d0 >= d1) {
        return Err(Error::SandwichOrdering {
            d0,
            dstar: f64::NAN,
            d1,
        });
    }
    let (d_hi, d_lo) = match shape {
        Shape::Equilibrium => (d0, d0),
        _ => (d0, d1),
    };
    let mut values = Vec::with_capacity(grid.cells());
    for &r in &grid.centers {
        let d = shape.parameter(d_hi, d_lo, r);
        let u = profile_value(e, d, r);
        let below = profile_value(e, d_hi, r);
        let above = profile_value(e, d_lo, r);
        let slack = 1e-14 * above;
        if !(u.is_finite() && u >= below - slack && u <= above + slack) {
            return Err(Error::SandwichViolation { radius: r });
        }
        values.push(u.clamp(below, above));
    }
    let mass = grid.integrate(&values);
    let dstar = if d_hi == d_lo {
        d_hi
    } else {
        discrete_dstar(e, &grid, mass, d_lo, d_hi)?
    };
    let profile = BarenblattProfile::new(*e, dstar)?;
    let bounds = SandwichBounds::new(e, d_hi, d_lo, dstar)?;
    let equilibrium = Equilibrium::new(profile, grid.clone())?;
    Ok(InitialData {
        field: DensityField {
            grid,
            exponents: *e,
            values,
        },
        mass,
        bounds,
        equilibrium,
    })
}

/// `D` in `[lo, hi]` with `sum_i w_i u_D(r_i) = mass`, by bisection in `ln D`.
pub fn discrete_dstar(
    e: &Exponents,
    grid: &RadialGrid,
    mass: f64,
    lo: f64,
    hi: f64,
) -> Result<f64> {
    let m = |d: f64| -> f64 {
        grid.volumes
            .iter()
            .zip(&grid.centers)
            .map(|(w, &r)| w * profile_value(e, d, r))
            .sum()
    };
    let (mut a, mut b) = (lo, hi);
    let (ma, mb) = (m(a), m(b));
    // discrete mass decreases in D
    if !(ma >= mass && mb <= mass) {
        return Err(Error::Domain {
            op: "discrete D*",
            detail: format!("mass {mass} not bracketed by [{mb}, {ma}] on [{lo}, {hi}]"),
        });
    }
    for _ in 0..200 {
        if b / a - 1.0 < 4.0 * f64::EPSILON {
            break;
        }
        let mid = (a * b).sqrt();
        if m(mid) > mass {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(if (m(a) - mass).abs() <= (m(b) - mass).abs() {
        a
    } else {
        b
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn setup() -> (Exponents, Arc<RadialGrid>) {
        let e = Exponents::derive(4.0 / 3.0, 1.5, 3).unwrap();
        (e, Arc::new(RadialGrid::new(3, 1e3, 256, 1.03).unwrap()))
    }

    #[test]
    fn equilibrium_shape() {
        let (e, g) = setup();
        let init = build_initial_data(&e, 1.2, 0.7, g, &Shape::Equilibrium).unwrap();
        assert_eq!(init.bounds.w0, 1.0);
        assert_eq!(init.bounds.w1, 1.0);
        assert_eq!(init.field.values, init.equilibrium.u);
    }

    #[test]
    fn step_is_sandwiched_and_mass_matched() {
        let (e, g) = setup();
        let shape = Shape::Step {
            radius: 1.0,
            width: 0.3,
        };
        let init = build_initial_data(&e, 2.0, 0.5, g.clone(), &shape).unwrap();
        let lo: f64 = g.integrate(
            &g.centers
                .iter()
                .map(|&r| profile_value(&e, 2.0, r))
                .collect::<Vec<_>>(),
        );
        let hi: f64 = g.integrate(
            &g.centers
                .iter()
                .map(|&r| profile_value(&e, 0.5, r))
                .collect::<Vec<_>>(),
        );
        assert!(lo <= init.mass && init.mass <= hi);
        for (i, &r) in g.centers.iter().enumerate() {
            let u = init.field.values[i];
            assert!(profile_value(&e, 2.0, r) <= u && u <= profile_value(&e, 0.5, r));
        }
        let b = &init.bounds;
        assert!(b.d1 <= b.dstar && b.dstar <= b.d0);
        assert!((init.equilibrium.mass() / init.mass - 1.0).abs() < 1e-14);
    }

    #[test]
    fn out_of_band_custom_rejected() {
        let (e, g) = setup();
        let shape = Shape::Custom(Arc::new(|r| if r > 5.0 { 3.0 } else { 1.0 }));
        match build_initial_data(&e, 2.0, 0.5, g, &shape) {
            Err(Error::SandwichViolation { radius }) => assert!(radius > 5.0),
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn bad_ordering_rejected() {
        let (e, g) = setup();
        assert!(build_initial_data(&e, 0.5, 2.0, g, &Shape::Equilibrium).is_err());
    }
}
