use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exponents::sphere_area;

/// Radial cells `[r_{i-1/2}, r_{i+1/2}]` of a ball in R^n, geometrically
/// stretched so that `dr_i = dr_0 * stretch^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub n: usize,
    pub r_max: f64,
    pub stretch: f64,
    /// `cells + 1` edge radii, starting at 0.
    pub edges: Vec<f64>,
    /// Cell midpoints.
    pub centers: Vec<f64>,
    /// Exact shell volumes.
    pub volumes: Vec<f64>,
    /// Sphere areas at the `cells - 1` interior edges.
    pub areas: Vec<f64>,
    /// Center-to-center distance across each interior edge.
    pub spacing: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n: usize, r_max: f64, cells: usize, stretch: f64) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidParameter {
                name: "n",
                value: n as f64,
                reason: "dimension must be positive",
            });
        }
        if !(r_max > 0.0) || !r_max.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid.r_max",
                value: r_max,
                reason: "must be positive and finite",
            });
        }
        if cells == 0 {
            return Err(Error::InvalidParameter {
                name: "grid.cells",
                value: 0.0,
                reason: "need at least one cell",
            });
        }
        if !(stretch >= 1.0) || !stretch.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid.stretch",
                value: stretch,
                reason: "must be >= 1",
            });
        }
        let nc = cells as f64;
        let dr0 = if stretch == 1.0 {
            r_max / nc
        } else {
            r_max * (stretch - 1.0) / (stretch.powf(nc) - 1.0)
        };
        if !(dr0 > 0.0) || !dr0.is_finite() {
            return Err(Error::InvalidParameter {
                name: "grid.stretch",
                value: stretch,
                reason: "first cell width underflows",
            });
        }
        let mut edges = Vec::with_capacity(cells + 1);
        edges.push(0.0);
        let mut w = dr0;
        for i in 0..cells {
            let next = if i + 1 == cells { r_max } else { edges[i] + w };
            edges.push(next);
            w *= stretch;
        }
        if edges.windows(2).any(|p| !(p[1] > p[0])) {
            return Err(Error::InvalidParameter {
                name: "grid.stretch",
                value: stretch,
                reason: "edges not strictly increasing",
            });
        }
        let sigma = sphere_area(n);
        let nf = n as f64;
        let centers: Vec<f64> = edges.windows(2).map(|p| 0.5 * (p[0] + p[1])).collect();
        let volumes = edges
            .windows(2)
            .map(|p| sigma * (p[1].powf(nf) - p[0].powf(nf)) / nf)
            .collect();
        let areas = edges[1..cells]
            .iter()
            .map(|r| sigma * r.powf(nf - 1.0))
            .collect();
        let spacing = centers.windows(2).map(|c| c[1] - c[0]).collect();
        Ok(RadialGrid {
            n,
            r_max,
            stretch,
            edges,
            centers,
            volumes,
            areas,
            spacing,
        })
    }

    pub fn cells(&self) -> usize {
        self.centers.len()
    }

    /// Radius of interior edge `e` (between cells `e` and `e + 1`).
    pub fn edge_radius(&self, e: usize) -> f64 {
        self.edges[e + 1]
    }

    /// Width of the innermost cell.
    pub fn h_min(&self) -> f64 {
        self.edges[1]
    }

    /// Largest relative cell width `dr_i / r_{i+1/2}` outside the first cell.
    pub fn max_relative_width(&self) -> f64 {
        self.edges
            .windows(2)
            .skip(1)
            .map(|p| (p[1] - p[0]) / p[1])
            .fold(0.0, f64::max)
    }

    /// Twice the cells, square-rooted stretch: the same edge family at half spacing.
    pub fn refined(&self) -> Result<Self> {
        RadialGrid::new(self.n, self.r_max, 2 * self.cells(), self.stretch.sqrt())
    }

    pub fn ball_volume(&self) -> f64 {
        sphere_area(self.n) * self.r_max.powf(self.n as f64) / self.n as f64
    }

    /// `sum_i w_i f_i` with shell volumes.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.volumes.iter().zip(f).map(|(w, v)| w * v).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_shell_is_unit_ball() {
        let g = RadialGrid::new(3, 1.0, 1, 1.0).unwrap();
        assert_eq!(g.cells(), 1);
        assert!((g.volumes[0] - 4.0 * std::f64::consts::PI / 3.0).abs() < 1e-14);
        assert!(g.areas.is_empty());
    }

    #[test]
    fn uniform_when_unstretched() {
        let g = RadialGrid::new(3, 2.0, 40, 1.0).unwrap();
        for p in g.edges.windows(2) {
            assert!((p[1] - p[0] - 0.05).abs() < 1e-14);
        }
    }

    #[test]
    fn degenerate_rejected() {
        assert!(RadialGrid::new(3, 0.0, 10, 1.0).is_err());
        assert!(RadialGrid::new(3, 1.0, 0, 1.0).is_err());
        assert!(RadialGrid::new(3, 1.0, 10, 0.9).is_err());
        assert!(RadialGrid::new(3, 1.0, 2000, 2.0).is_err());
    }

    #[test]
    fn refinement_nests_edges() {
        let g = RadialGrid::new(3, 100.0, 64, 1.05).unwrap();
        let f = g.refined().unwrap();
        for (i, e) in g.edges.iter().enumerate() {
            assert!((f.edges[2 * i] - e).abs() < 1e-9 * e.max(1.0));
        }
    }

    proptest! {
        #[test]
        fn volumes_telescope(n in 3usize..7, r_max in 0.5f64..1e5, cells in 16usize..600, s in 1.0f64..1.04) {
            let g = RadialGrid::new(n, r_max, cells, s).unwrap();
            let total: f64 = g.volumes.iter().sum();
            prop_assert!((total / g.ball_volume() - 1.0).abs() < 1e-12);
            prop_assert!(g.volumes.iter().all(|w| *w > 0.0));
            prop_assert!(g.edges.windows(2).all(|p| p[1] > p[0]));
            prop_assert_eq!(*g.edges.last().unwrap(), r_max);
        }
    }
}
