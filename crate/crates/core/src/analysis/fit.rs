use serde::{Deserialize, Serialize};

use crate::analysis::series::DiagnosticsSeries;
use crate::error::{Error, Result};

/// How the late-time window is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindowPolicy {
    /// Largest suffix whose log-linear fit reaches this coefficient of determination.
    pub r2_min: f64,
    pub min_points: usize,
    /// Samples before this time are never used.
    pub tau_min: f64,
    /// Values below `max(floor_abs, floor_rel * max)` count as converged.
    pub floor_rel: f64,
    pub floor_abs: f64,
}

impl Default for WindowPolicy {
    fn default() -> Self {
        WindowPolicy {
            r2_min: 0.995,
            min_points: 10,
            tau_min: 0.0,
            floor_rel: 1e-24,
            floor_abs: 1e-300,
        }
    }
}

impl WindowPolicy {
    /// Defaults matched to how a column scales with the perturbation:
    /// entropies and Fisher informations are quadratic, `L1_dist` is linear.
    pub fn for_column(column: &str, mass: f64) -> Self {
        let (rel, abs) = if column == "L1_dist" {
            (1e-12, 1e-14 * mass)
        } else {
            (1e-14, 1e-28 * mass)
        };
        WindowPolicy {
            floor_rel: rel,
            floor_abs: abs,
            ..WindowPolicy::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Fitted,
    /// The column reached the floor; the fit uses the prefix before it.
    Truncated,
    /// Every sample is at the floor (equilibrium run); no rate.
    AtFloor,
}

/// `value ~ exp(intercept - rate tau)` over `[tau_a, tau_b]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub column: String,
    pub status: FitStatus,
    pub rate: f64,
    /// `ln` of the prefactor; `exp(intercept)` is the constant in front of the exponential.
    pub intercept: f64,
    pub tau_a: f64,
    pub tau_b: f64,
    pub points: usize,
    /// RMS of the log residuals.
    pub residual: f64,
    pub r_squared: f64,
}

/// Ordinary least squares `y = a + b x`; returns `(b, a, r2, rms)`.
pub fn least_squares(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    let slope = sxy / sxx;
    let icpt = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icpt - slope * a).powi(2))
        .sum();
    let r2 = if syy > 0.0 { 1.0 - sse / syy } else { 1.0 };
    (slope, icpt, r2, (sse / n).sqrt())
}

/// Auto-windowed exponential fit of a named column.
pub fn fit_exponential(
    series: &DiagnosticsSeries,
    column: &str,
    policy: &WindowPolicy,
) -> Result<RateFit> {
    let values = series.column(column)?;
    fit_values(&series.taus(), &values, column, policy)
}

/// Same as `fit_exponential` on raw arrays.
pub fn fit_values(
    tau: &[f64],
    values: &[f64],
    column: &str,
    policy: &WindowPolicy,
) -> Result<RateFit> {
    let fail = |reason: String| Error::Fit {
        column: column.to_string(),
        reason,
    };
    let start = tau.partition_point(|t| *t < policy.tau_min);
    let vmax = values[start..].iter().copied().fold(0.0, f64::max);
    let floor = policy.floor_abs.max(policy.floor_rel * vmax);
    let end = (start..values.len())
        .find(|&i| !(values[i] > floor))
        .unwrap_or(values.len());
    if end == start {
        let (a, b) = (
            tau.get(start).copied().unwrap_or(0.0),
            tau.last().copied().unwrap_or(0.0),
        );
        return Ok(RateFit {
            column: column.to_string(),
            status: FitStatus::AtFloor,
            rate: 0.0,
            intercept: floor.max(f64::MIN_POSITIVE).ln(),
            tau_a: a,
            tau_b: b,
            points: 0,
            residual: 0.0,
            r_squared: 0.0,
        });
    }
    let status = if end < values.len() {
        FitStatus::Truncated
    } else {
        FitStatus::Fitted
    };
    let len = end - start;
    if len < policy.min_points {
        return Err(fail(format!(
            "{len} samples above the floor, need {}",
            policy.min_points
        )));
    }
    let x = &tau[start..end];
    let y: Vec<f64> = values[start..end].iter().map(|v| v.ln()).collect();
    // largest suffix first
    for s in 0..=(len - policy.min_points) {
        let (slope, icpt, r2, rms) = least_squares(&x[s..], &y[s..]);
        if r2 >= policy.r2_min {
            return Ok(RateFit {
                column: column.to_string(),
                status,
                rate: -slope,
                intercept: icpt,
                tau_a: x[s],
                tau_b: x[len - 1],
                points: len - s,
                residual: rms,
                r_squared: r2,
            });
        }
    }
    Err(fail(format!(
        "no late-time window with r^2 >= {} (not in the asymptotic regime)",
        policy.r2_min
    )))
}
