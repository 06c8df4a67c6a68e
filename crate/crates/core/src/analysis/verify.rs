use serde::{Deserialize, Serialize};

use crate::analysis::fit::{fit_exponential, least_squares, FitStatus, RateFit, WindowPolicy};
use crate::analysis::series::{DiagnosticsSeries, Sample};
use crate::error::{Error, Result};
use crate::exponents::Exponents;
use crate::functionals::ComparisonConstants;
use crate::solver::transform::time_from_tau;
use crate::spectral::GapResult;

/// Relative round-off allowance on one-sided inequalities.
pub const ROUNDOFF: f64 = 1e-10;

/// One pass/fail entry; `slack >= 0` means the check holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub slack: f64,
    /// `slack / |rhs|` for inequalities, `slack / tol` for tolerance checks.
    pub rel_slack: f64,
}

impl Check {
    /// `lhs <= rhs` up to round-off.
    pub fn le(name: &str, lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        let scale = lhs.abs().max(rhs.abs());
        Check {
            name: name.to_string(),
            pass: slack >= -ROUNDOFF * scale,
            slack,
            rel_slack: if rhs != 0.0 { slack / rhs.abs() } else { 0.0 },
        }
    }

    /// `|measured/expected - 1| <= tol`.
    pub fn rel_close(name: &str, measured: f64, expected: f64, tol: f64) -> Self {
        let err = (measured / expected - 1.0).abs();
        let slack = if err.is_finite() {
            tol - err
        } else {
            f64::NEG_INFINITY
        };
        Check {
            name: name.to_string(),
            pass: slack >= 0.0,
            slack,
            rel_slack: slack / tol,
        }
    }

    fn flag(name: &str, pass: bool, slack: f64) -> Self {
        Check {
            name: name.to_string(),
            pass,
            slack,
            rel_slack: slack,
        }
    }
}

/// Constants measured over a time window: `W0 = min w` (at most 1),
/// `W1 = max w` (at least 1), `eta = max Phi_eps` for sweep entry `eps_index`.
pub fn window_constants(
    e: &Exponents,
    samples: &[Sample],
    eps_index: usize,
) -> Result<ComparisonConstants> {
    if samples.is_empty() {
        return Err(Error::Domain {
            op: "window constants",
            detail: "empty window".into(),
        });
    }
    let w0 = samples.iter().map(|s| s.w_min).fold(1.0, f64::min);
    let w1 = samples.iter().map(|s| s.w_max).fold(1.0, f64::max);
    let eta = samples
        .iter()
        .map(|s| s.phi_eps.get(eps_index).copied().unwrap_or(f64::NAN))
        .fold(0.0, f64::max);
    Ok(ComparisonConstants::from_range(e, w0, w1)?.with_eta(e, eta))
}

/// `lambda_theo` for one regularization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoCandidate {
    pub eps: f64,
    pub beta_tilde: f64,
    pub constants: ComparisonConstants,
    /// `None` while `kappa2 beta_tilde >= 2`.
    pub lambda_theo: Option<f64>,
}

/// `lambda_theo` for every `eps` in the sweep, paired with gaps in the same order.
pub fn theo_sweep(
    series: &DiagnosticsSeries,
    window: &[Sample],
    gaps: &[GapResult],
) -> Result<Vec<TheoCandidate>> {
    let e = series.meta.exponents()?;
    gaps.iter()
        .enumerate()
        .map(|(k, g)| {
            let c = window_constants(&e, window, k)?;
            Ok(TheoCandidate {
                eps: g.eps,
                beta_tilde: g.beta_tilde,
                lambda_theo: c.lambda_theo(g.beta_tilde),
                constants: c,
            })
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub window: WindowPolicy,
    /// Allowed shortfall of `lambda_emp` below `lambda_theo`.
    pub theo_margin: f64,
    /// Tolerance on `rate(L1) = lambda_emp / 2`.
    pub l1_tol: f64,
    /// Tolerance on the original-variable log-log slope.
    pub loglog_tol: f64,
    /// Minimum `delta_p t` for samples in the log-log fit.
    pub loglog_min_dt: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            window: WindowPolicy::default(),
            theo_margin: 0.10,
            l1_tol: 0.15,
            loglog_tol: 0.10,
            loglog_min_dt: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem1Report {
    /// Every distance sampled at the floor.
    pub trivial: bool,
    pub entropy_fit: RateFit,
    pub l1_fit: Option<RateFit>,
    pub lambda_emp: f64,
    pub lambda_theo: Option<f64>,
    pub eps: f64,
    pub beta_tilde: f64,
    /// Fitted `L1 ~ t^{-slope}` in original variables, and the expected `lambda_emp/(2 delta_p)`.
    pub loglog_slope: Option<f64>,
    pub loglog_expected: f64,
    pub checks: Vec<Check>,
    pub deferred: Option<String>,
}

impl Theorem1Report {
    pub fn passed(&self) -> bool {
        self.deferred.is_none() && self.checks.iter().all(|c| c.pass)
    }
}

/// Largest relative increase of `E_rel` between consecutive samples.
fn entropy_monotonicity(samples: &[Sample]) -> f64 {
    samples
        .windows(2)
        .map(|w| {
            let (a, b) = (w[0].functionals.e_rel, w[1].functionals.e_rel);
            if a > 0.0 {
                (b - a) / a
            } else if b > 0.0 {
                f64::INFINITY
            } else {
                0.0
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Two decay statements: exponential decay of the entropy at a measured
/// rate no slower than the reconstructed bound, and the `L1` restatement in
/// rescaled and in original variables.
pub fn verify_theorem1(
    series: &DiagnosticsSeries,
    gap: &GapResult,
    constants: &ComparisonConstants,
    opts: &VerifyOptions,
) -> Result<Theorem1Report> {
    let e = series.meta.exponents()?;
    let mass = series.samples.first().map(|s| s.mass).unwrap_or(1.0);
    let mut wp = WindowPolicy::for_column("E_rel", mass);
    wp.r2_min = opts.window.r2_min;
    wp.min_points = opts.window.min_points;
    wp.tau_min = opts.window.tau_min;
    let entropy_fit = fit_exponential(series, "E_rel", &wp)?;
    let lambda_theo = constants.lambda_theo(gap.beta_tilde);
    let expected_slope = |lam: f64| lam / (2.0 * e.delta_p);
    let mut checks = Vec::new();
    let rise = entropy_monotonicity(&series.samples);
    checks.push(Check::flag("entropy_monotone", !(rise > 1e-9), -rise));
    if entropy_fit.status == FitStatus::AtFloor {
        return Ok(Theorem1Report {
            trivial: true,
            entropy_fit,
            l1_fit: None,
            lambda_emp: 0.0,
            lambda_theo,
            eps: gap.eps,
            beta_tilde: gap.beta_tilde,
            loglog_slope: None,
            loglog_expected: 0.0,
            checks,
            deferred: None,
        });
    }
    let lambda = entropy_fit.rate;
    checks.push(Check::flag("lambda_emp_positive", lambda > 0.0, lambda));
    checks.push(Check::flag(
        "entropy_fit_r2",
        entropy_fit.r_squared >= wp.r2_min,
        entropy_fit.r_squared - wp.r2_min,
    ));
    let deferred = match lambda_theo {
        Some(t) => {
            checks.push(Check::le(
                "lambda_emp_vs_theo",
                (1.0 - opts.theo_margin) * t,
                lambda,
            ));
            None
        }
        None => Some(format!(
            "kappa2 * beta_tilde = {:.6e} >= 2 over the fit window [{}, {}]",
            constants.kappa2 * gap.beta_tilde,
            entropy_fit.tau_a,
            entropy_fit.tau_b
        )),
    };
    let mut lp = WindowPolicy::for_column("L1_dist", mass);
    lp.r2_min = wp.r2_min;
    lp.min_points = wp.min_points;
    lp.tau_min = wp.tau_min;
    let l1_fit = fit_exponential(series, "L1_dist", &lp)?;
    checks.push(Check::rel_close(
        "l1_rate_half_lambda",
        l1_fit.rate,
        0.5 * lambda,
        opts.l1_tol,
    ));
    // original variables: L1 is invariant under the mass-preserving rescaling
    let pts: Vec<(f64, f64)> = series
        .window(l1_fit.tau_a, l1_fit.tau_b)
        .iter()
        .map(|s| (time_from_tau(&e, s.tau), s.l1_dist))
        .filter(|(t, v)| e.delta_p * t >= opts.loglog_min_dt && *v > 0.0)
        .collect();
    let loglog_slope = if pts.len() >= wp.min_points {
        let x: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
        let y: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
        Some(-least_squares(&x, &y).0)
    } else {
        None
    };
    match loglog_slope {
        Some(s) => checks.push(Check::rel_close(
            "original_loglog_slope",
            s,
            expected_slope(lambda),
            opts.loglog_tol,
        )),
        None => checks.push(Check::flag(
            "original_loglog_slope",
            false,
            f64::NEG_INFINITY,
        )),
    }
    Ok(Theorem1Report {
        trivial: false,
        entropy_fit,
        l1_fit: Some(l1_fit),
        lambda_emp: lambda,
        lambda_theo,
        eps: gap.eps,
        beta_tilde: gap.beta_tilde,
        loglog_slope,
        loglog_expected: expected_slope(lambda),
        checks,
        deferred,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotChecks {
    pub tau: f64,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub beta_tilde: f64,
    pub constants: ComparisonConstants,
    pub lambda_theo: Option<f64>,
    pub snapshots: Vec<SnapshotChecks>,
    /// Smallest relative slack per check name.
    pub worst: Vec<Check>,
    pub deferred: Option<String>,
}

impl ChainReport {
    pub fn passed(&self) -> bool {
        self.deferred.is_none()
            && self
                .snapshots
                .iter()
                .all(|s| s.checks.iter().all(|c| c.pass))
    }
}

/// Per-snapshot inequalities of the logarithmic-Sobolev chain, using the
/// functionals sampled at `beta_tilde`'s regularization.
///
/// The nonlinear Fisher information is the unregularized one.
/// For `p < 2` the linear Fisher terms are the `eps`-regularized ones; for
/// `p >= 2` the samples carry `eps = 0`, so the same columns hold the plain forms.
pub fn verify_logsob_chain(
    samples: &[Sample],
    beta_tilde: f64,
    constants: &ComparisonConstants,
) -> Result<ChainReport> {
    let lambda_theo = constants.lambda_theo(beta_tilde);
    let k1 = constants.kappa1().ok_or(Error::Domain {
        op: "logsob chain",
        detail: "Claim-2 constant needs a measured eta".into(),
    })?;
    let delta = constants.delta.unwrap_or(f64::NAN);
    let mut report = ChainReport {
        beta_tilde,
        constants: *constants,
        lambda_theo,
        snapshots: Vec::new(),
        worst: Vec::new(),
        deferred: None,
    };
    let Some(lt) = lambda_theo else {
        report.deferred = Some(format!(
            "kappa2 * beta_tilde = {:.6e} >= 2: the sandwich [{}, {}] is still too wide",
            constants.kappa2 * beta_tilde,
            constants.w0,
            constants.w1
        ));
        return Ok(report);
    };
    let lin_coeff = k1 * beta_tilde / (2.0 - constants.kappa2 * beta_tilde);
    for s in samples {
        let f = &s.functionals;
        let i_rel = s.i_rel_exact();
        let checks = vec![
            Check::le("entropy_lower", constants.c_low * f.e_lin, f.e_rel),
            Check::le("entropy_upper", f.e_rel, constants.c_high * f.e_lin),
            Check::le("strong_logsob", f.e_lin, 0.5 * beta_tilde * f.i_eps),
            Check::le(
                "claim1",
                f.i_eps,
                constants.kappa0 * f.i_gamma_eps + constants.kappa2 * f.e_lin,
            ),
            Check::le("claim2", f.i_gamma_eps, delta * i_rel),
            Check::le("linear_logsob", f.e_lin, lin_coeff * i_rel),
            Check::le("nonlinear_logsob", f.e_rel, i_rel / lt),
        ];
        for c in &checks {
            match report.worst.iter_mut().find(|w| w.name == c.name) {
                Some(w) if c.rel_slack < w.rel_slack || (!c.pass && w.pass) => *w = c.clone(),
                Some(_) => {}
                None => report.worst.push(c.clone()),
            }
        }
        report.snapshots.push(SnapshotChecks { tau: s.tau, checks });
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DissipationReport {
    pub tau_a: f64,
    pub tau_b: f64,
    pub points: usize,
    pub max_rel_err: f64,
    pub mean_rel_err: f64,
}

/// `|dE/dtau + I| / I` with `dE` over two equal sample intervals and the
/// dissipation integrated by Simpson's rule. Samples before `tau_min` and
/// those with `E_rel < rel_floor * E_rel(0)` are skipped.
pub fn dissipation_identity(
    series: &DiagnosticsSeries,
    tau_min: f64,
    rel_floor: f64,
) -> Result<DissipationReport> {
    let s = &series.samples;
    let e0 = s.first().map(|x| x.functionals.e_rel).unwrap_or(0.0);
    let mut errs = Vec::new();
    let (mut a, mut b) = (f64::NAN, f64::NAN);
    for k in 1..s.len().saturating_sub(1) {
        let (l, m, r) = (&s[k - 1], &s[k], &s[k + 1]);
        if l.tau < tau_min || r.functionals.e_rel < rel_floor * e0 {
            continue;
        }
        let (h1, h2) = (m.tau - l.tau, r.tau - m.tau);
        if (h1 - h2).abs() > 1e-9 * h1 {
            continue;
        }
        let de = r.functionals.e_rel - l.functionals.e_rel;
        let int_i =
            (h1 / 3.0) * (l.functionals.i_rel + 4.0 * m.functionals.i_rel + r.functionals.i_rel);
        if !(int_i > 0.0) {
            continue;
        }
        errs.push((de + int_i).abs() / int_i);
        if a.is_nan() {
            a = l.tau;
        }
        b = r.tau;
    }
    if errs.is_empty() {
        return Err(Error::Fit {
            column: "E_rel".into(),
            reason: "no admissible sample triples for the dissipation identity".into(),
        });
    }
    Ok(DissipationReport {
        tau_a: a,
        tau_b: b,
        points: errs.len(),
        max_rel_err: errs.iter().copied().fold(0.0, f64::max),
        mean_rel_err: errs.iter().sum::<f64>() / errs.len() as f64,
    })
}

/// Index of the measured onset `t0`: the first sample after which the
/// constants over `[t0, end]` give `kappa2 beta_tilde < 2`.
pub fn onset_index(series: &DiagnosticsSeries, beta_tilde: f64) -> Result<Option<usize>> {
    let e = series.meta.exponents()?;
    let s = &series.samples;
    let n = s.len();
    let mut lo = vec![1.0f64; n + 1];
    let mut hi = vec![1.0f64; n + 1];
    for k in (0..n).rev() {
        lo[k] = lo[k + 1].min(s[k].w_min);
        hi[k] = hi[k + 1].max(s[k].w_max);
    }
    for k in 0..n {
        let c = ComparisonConstants::from_range(&e, lo[k], hi[k])?;
        if c.kappa2 * beta_tilde < 2.0 {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

/// Full verification of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunVerification {
    pub onset_tau: Option<f64>,
    /// One candidate per `eps` of the run's sweep.
    pub sweep: Vec<TheoCandidate>,
    /// Sweep entry with the largest `lambda_theo`.
    pub best: Option<usize>,
    pub theorem1: Theorem1Report,
    pub chain: ChainReport,
    pub dissipation: Option<DissipationReport>,
}

impl RunVerification {
    pub fn passed(&self) -> bool {
        self.theorem1.passed() && self.chain.passed()
    }
}

/// Onset detection, `lambda_theo` sweep, decay statements and the chain.
/// `gaps[k]` must be computed on the run's grid for `meta.eps_sweep[k]`.
pub fn verify_run(
    series: &DiagnosticsSeries,
    gaps: &[GapResult],
    opts: &VerifyOptions,
) -> Result<RunVerification> {
    if gaps.is_empty() || gaps.len() != series.meta.eps_sweep.len() {
        return Err(Error::Domain {
            op: "verify",
            detail: format!(
                "{} gaps for {} regularizations",
                gaps.len(),
                series.meta.eps_sweep.len()
            ),
        });
    }
    if series.len() < 2 {
        return Err(Error::Fit {
            column: "E_rel".into(),
            reason: "series has fewer than two samples".into(),
        });
    }
    let main = &gaps[0];
    let start = onset_index(series, main.beta_tilde)?;
    let window = &series.samples[start.unwrap_or(0)..];
    let sweep = theo_sweep(series, window, gaps)?;
    let best = sweep
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.lambda_theo.map(|l| (k, l)))
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(k, _)| k);
    let pick = best.unwrap_or(0);
    let mut o = *opts;
    o.window.tau_min = o.window.tau_min.max(window[0].tau);
    let theorem1 = verify_theorem1(series, &gaps[pick], &sweep[pick].constants, &o)?;
    let chain = verify_logsob_chain(window, main.beta_tilde, &sweep[0].constants)?;
    let dissipation = dissipation_identity(series, 1.0, 1e-9).ok();
    Ok(RunVerification {
        onset_tau: start.map(|k| series.samples[k].tau),
        sweep,
        best,
        theorem1,
        chain,
        dissipation,
    })
}
