use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use dnl_core::analysis::{
    fit_exponential, onset_index, verify_logsob_chain, verify_run, window_constants, Check,
    DiagnosticsSeries, FitStatus, VerifyOptions, WindowPolicy,
};
use dnl_core::barenblatt::{profile_value, solve_dstar, BarenblattProfile};
use dnl_core::exponents::Exponents;
use dnl_core::functionals::{div_weight, fp_ratio};
use dnl_core::solver::{
    build_initial_data, sample_field, simulate, to_original_variables, Equilibrium, Mobility,
    RadialGrid,
};
use dnl_core::spectral::{assemble, gap_on_grid, hardy_poincare_constant, GapResult};

use crate::config::RunConfig;
use crate::error::CliError;
use crate::report::{read_json, write_json, Provenance, Report};

pub const SERIES_CSV: &str = "series.csv";
pub const SERIES_JSON: &str = "series.json";
pub const SNAPSHOTS_JSON: &str = "snapshots.json";
pub const RUN_JSON: &str = "run.json";
pub const PROFILE_CSV: &str = "profile.csv";
pub const PROFILE_JSON: &str = "profile.json";
pub const SPECTRUM_JSON: &str = "spectrum.json";
pub const RATES_JSON: &str = "rates.json";
pub const VERIFY_JSON: &str = "verify.json";
pub const CHECK_JSON: &str = "check.json";

/// Stored density snapshots, in rescaled and original variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotFile {
    pub provenance: Provenance,
    /// Cell centers `y` and shell volumes of the rescaled grid.
    pub y: Vec<f64>,
    pub volumes: Vec<f64>,
    pub snapshots: Vec<SnapshotRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotRecord {
    pub tau: f64,
    pub t: f64,
    pub scale: f64,
    pub u: Vec<f64>,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
}

fn io_err(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io {
        path: path.to_path_buf(),
        source: e,
    }
}

fn out_dir(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = cfg.output_dir();
    std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn load_series(dir: &Path, cfg: &RunConfig) -> Result<DiagnosticsSeries, CliError> {
    let path = dir.join(SERIES_JSON);
    let series: DiagnosticsSeries = read_json(&path)?;
    if series.meta.config_hash != cfg.hash() {
        return Err(CliError::Artifact {
            path,
            detail: format!(
                "written by config {}, current config is {}",
                series.meta.config_hash,
                cfg.hash()
            ),
        });
    }
    Ok(series)
}

fn initial_equilibrium(cfg: &RunConfig) -> Result<(Exponents, Equilibrium, f64), CliError> {
    let e = cfg.simulation()?.validate()?;
    let grid = Arc::new(RadialGrid::new(
        cfg.n,
        cfg.grid.r_max,
        cfg.grid.cells,
        cfg.grid.stretch,
    )?);
    let init = build_initial_data(&e, cfg.init.d0, cfg.init.d1, grid, &cfg.shape())?;
    Ok((e, init.equilibrium, init.mass))
}

fn sandwich_constants(
    r: &mut Report,
    cfg: &RunConfig,
    e: &Exponents,
    eq: &Equilibrium,
    mass: f64,
) -> Result<(), CliError> {
    r.constant("dstar", eq.profile.d)
        .constant("dstar_continuum", solve_dstar(e, mass)?.d)
        .constant("mass", mass)
        .constant("D0", cfg.init.d0)
        .constant("D1", cfg.init.d1);
    Ok(())
}

/// `profile.csv`: the equilibrium, both sandwich profiles and the weights on the grid.
pub fn profile(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let (e, eq, mass) = initial_equilibrium(cfg)?;
    let eps = cfg.spectral_eps();
    let path = dir.join(PROFILE_CSV);
    let mut w =
        csv::Writer::from_writer(BufWriter::new(File::create(&path).map_err(io_err(&path))?));
    let csv_err = |e: csv::Error| CliError::Artifact {
        path: path.clone(),
        detail: e.to_string(),
    };
    w.write_record([
        "r",
        "u_Dstar",
        "u_D0",
        "u_D1",
        "mu_density",
        "nu_eps_density",
    ])
    .map_err(csv_err)?;
    for &r in &eq.grid.centers {
        let row = [
            r,
            eq.profile.eval(r),
            profile_value(&e, cfg.init.d0, r),
            profile_value(&e, cfg.init.d1, r),
            eq.profile.mu_density(r),
            eq.profile.nu_density(r, eps)?,
        ];
        w.write_record(row.iter().map(|v| format!("{v:.16e}")))
            .map_err(csv_err)?;
    }
    w.flush().map_err(io_err(&path))?;
    let mut rep = Report::new(cfg, "profile", e);
    sandwich_constants(&mut rep, cfg, &e, &eq, mass)?;
    rep.constant("eps", eps);
    rep.finish(&dir.join(PROFILE_JSON))
}

/// Run the solver; write the series (CSV and JSON), snapshots and `run.json`.
pub fn simulate_cmd(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let out = simulate(&cfg.simulation()?)?;
    let series = &out.series;
    let e = series.meta.exponents()?;
    let path = dir.join(SERIES_CSV);
    series.write_csv(BufWriter::new(File::create(&path).map_err(io_err(&path))?))?;
    write_json(&dir.join(SERIES_JSON), series)?;

    let grid = &out.init.equilibrium.grid;
    let snaps = SnapshotFile {
        provenance: Provenance::new(cfg, "simulate"),
        y: grid.centers.clone(),
        volumes: grid.volumes.clone(),
        snapshots: out
            .snapshots
            .iter()
            .map(|s| {
                let o = to_original_variables(&e, s.tau, &grid.centers, &s.values, &grid.volumes);
                SnapshotRecord {
                    tau: s.tau,
                    t: o.t,
                    scale: o.scale,
                    u: s.values.clone(),
                    x: o.x,
                    rho: o.rho,
                }
            })
            .collect(),
    };
    write_json(&dir.join(SNAPSHOTS_JSON), &snaps)?;

    let m0 = series.samples[0].mass;
    let drift = series
        .samples
        .iter()
        .map(|s| (s.mass / m0 - 1.0).abs())
        .fold(0.0, f64::max);
    let w_min = series
        .samples
        .iter()
        .map(|s| s.w_min)
        .fold(f64::INFINITY, f64::min);
    let w_max = series
        .samples
        .iter()
        .map(|s| s.w_max)
        .fold(f64::NEG_INFINITY, f64::max);
    let tol_h = grid.stretch - 1.0;
    let mut rep = Report::new(cfg, "simulate", e);
    rep.constant("dstar", series.meta.dstar)
        .constant("dstar_continuum", series.meta.dstar_continuum)
        .constant("W0", series.meta.w0)
        .constant("W1", series.meta.w1)
        .constant("eps_reg", series.meta.eps_reg)
        .constant("mass", m0)
        .constant("mass_drift", drift)
        .constant("w_min", w_min)
        .constant("w_max", w_max)
        .constant("sandwich_tol", tol_h)
        .constant("steps", out.state.step_count)
        .constant("rejected_steps", out.state.rejected_steps)
        .constant("clipped_mass", out.state.clipped_mass);
    rep.check(&Check::le("mass_drift", drift, 1e-12))
        .check(&Check::le("sandwich_lower", series.meta.w0 - tol_h, w_min))
        .check(&Check::le("sandwich_upper", w_max, series.meta.w1 + tol_h));
    rep.extra("samples", series.len())
        .extra("snapshots", snaps.snapshots.len());
    rep.finish(&dir.join(RUN_JSON))
}

/// Hardy-Poincare constant on the configured grid and its refinement, for
/// `spectral.eps` and every `reg.eps_sweep` entry.
pub fn spectrum(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let (e, eq, _) = initial_equilibrium(cfg)?;
    let mut eps = vec![cfg.spectral_eps()];
    if e.p < 2.0 {
        for &x in &cfg.reg.eps_sweep {
            if !eps.contains(&x) {
                eps.push(x);
            }
        }
    }
    let profile: BarenblattProfile = eq.profile;
    let gaps: Vec<GapResult> = eps
        .par_iter()
        .map(|&x| hardy_poincare_constant(&profile, x, eq.grid.clone(), cfg.spectral.ell_max))
        .collect::<dnl_core::Result<_>>()?;
    let main = &gaps[0];
    let mut rep = Report::new(cfg, "spectrum", e);
    rep.constant("eps", main.eps)
        .constant("beta_tilde", main.beta_tilde)
        .constant("beta", main.beta)
        .constant("radial_rate", main.radial_rate)
        .constant("argmin_ell", main.argmin_ell)
        .constant("dstar", profile.d);
    for g in &gaps {
        let tag = format!("eps={}", g.eps);
        let ok = g.beta_tilde.is_finite() && g.beta_tilde > 0.0;
        rep.check(&Check {
            name: format!("beta_tilde_positive[{tag}]"),
            pass: ok,
            slack: g.beta_tilde,
            rel_slack: 1.0,
        });
        if let Some(d) = g.refinement_delta {
            rep.check(&Check::le(&format!("refinement_delta[{tag}]"), d, 0.02));
        }
    }
    if e.p < 2.0 {
        let mut sorted: Vec<&GapResult> = gaps.iter().collect();
        sorted.sort_by(|a, b| a.eps.total_cmp(&b.eps));
        for w in sorted.windows(2) {
            rep.check(&Check::le(
                &format!("beta_tilde_monotone[{}<{}]", w[0].eps, w[1].eps),
                w[0].beta_tilde,
                w[1].beta_tilde,
            ));
        }
    }
    rep.extra("gaps", &gaps);
    rep.finish(&dir.join(SPECTRUM_JSON))
}

/// Auto-windowed exponential fits of the stored series.
pub fn rates(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let series = load_series(&dir, cfg)?;
    let e = series.meta.exponents()?;
    let mass = series.samples[0].mass;
    let fits = ["E_rel", "L1_dist", "E_lin", "I_rel"]
        .iter()
        .map(|c| fit_exponential(&series, c, &WindowPolicy::for_column(c, mass)))
        .collect::<dnl_core::Result<Vec<_>>>()?;
    let (fe, fl) = (&fits[0], &fits[1]);
    let mut rep = Report::new(cfg, "rates", e);
    if fe.status == FitStatus::AtFloor {
        rep.check(&Check {
            name: "entropy_at_floor".into(),
            pass: true,
            slack: 0.0,
            rel_slack: 0.0,
        });
    } else {
        rep.constant("lambda_emp", fe.rate)
            .constant("l1_rate", fl.rate)
            .constant("intercept_E", fe.intercept)
            .constant("intercept_L1", fl.intercept);
        rep.check(&Check {
            name: "lambda_emp_positive".into(),
            pass: fe.rate > 0.0,
            slack: fe.rate,
            rel_slack: 1.0,
        })
        .check(&Check::le("entropy_fit_r2", 0.995, fe.r_squared))
        .check(&Check::rel_close(
            "l1_rate_half_lambda",
            fl.rate,
            0.5 * fe.rate,
            0.15,
        ));
    }
    rep.fits = fits;
    rep.finish(&dir.join(RATES_JSON))
}

fn sweep_gaps(
    series: &DiagnosticsSeries,
    ell_max: usize,
) -> Result<(Equilibrium, Vec<GapResult>), CliError> {
    let eq = series.meta.equilibrium()?;
    let gaps = series
        .meta
        .eps_sweep
        .par_iter()
        .map(|&x| gap_on_grid(&eq, x, ell_max))
        .collect::<dnl_core::Result<Vec<_>>>()?;
    Ok((eq, gaps))
}

/// Theorem-level checks: decay rates against the reconstructed bound and the
/// logarithmic-Sobolev chain after the measured onset.
pub fn verify(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let series = load_series(&dir, cfg)?;
    let e = series.meta.exponents()?;
    let (_, gaps) = sweep_gaps(&series, cfg.spectral.ell_max)?;
    let v = verify_run(&series, &gaps, &VerifyOptions::default())?;
    let t1 = &v.theorem1;
    let c = &v.sweep[v.best.unwrap_or(0)].constants;
    let mut rep = Report::new(cfg, "verify", e);
    rep.constant("W0", c.w0)
        .constant("W1", c.w1)
        .constant("alpha0", c.alpha0)
        .constant("alpha1", c.alpha1)
        .constant("alpha2", c.alpha2)
        .constant("kappa0", c.kappa0)
        .constant("kappa1", c.kappa1())
        .constant("kappa2", c.kappa2)
        .constant("divbound", c.divbound)
        .constant("C_low", c.c_low)
        .constant("C_high", c.c_high)
        .constant("delta", c.delta)
        .constant("eta", c.eta)
        .constant("eps", t1.eps)
        .constant("beta_tilde", t1.beta_tilde)
        .constant("lambda_emp", t1.lambda_emp)
        .constant("lambda_theo", t1.lambda_theo)
        .constant("onset_tau", v.onset_tau)
        .constant("loglog_slope", t1.loglog_slope)
        .constant("loglog_expected", t1.loglog_expected);
    rep.fits.push(t1.entropy_fit.clone());
    rep.fits.extend(t1.l1_fit.clone());
    for ch in &t1.checks {
        rep.check(ch);
    }
    if let Some(d) = &t1.deferred {
        rep.check(&Check {
            name: "theorem1_deferred".into(),
            pass: false,
            slack: f64::NAN,
            rel_slack: f64::NAN,
        });
        rep.extra("theorem1_deferred", d);
    }
    for ch in &v.chain.worst {
        rep.check(&Check {
            name: format!("chain.{}", ch.name),
            ..ch.clone()
        });
    }
    if let Some(d) = &v.chain.deferred {
        rep.check(&Check {
            name: "chain_deferred".into(),
            pass: false,
            slack: f64::NAN,
            rel_slack: f64::NAN,
        });
        rep.extra("chain_deferred", d);
    }
    rep.extra("trivial", t1.trivial)
        .extra("sweep", &v.sweep)
        .extra("gaps", &gaps)
        .extra("dissipation", &v.dissipation)
        .extra("chain_snapshots", v.chain.snapshots.len());
    rep.finish(&dir.join(VERIFY_JSON))
}

/// Random zero-mean test functions against the discrete Hardy-Poincare inequality.
fn random_hardy_checks(
    eq: &Equilibrium,
    gap: &GapResult,
    seed: u64,
    count: usize,
) -> Result<Check, CliError> {
    let prob = assemble(eq, gap.eps, 0)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let logs: Vec<f64> = eq.grid.centers.iter().map(|r| r.ln()).collect();
    let (lo, hi) = (logs[0], logs[logs.len() - 1]);
    let total: f64 = prob.mass.iter().sum();
    let mut worst: Option<Check> = None;
    for _ in 0..count {
        let bumps: Vec<(f64, f64, f64)> = (0..4)
            .map(|_| {
                (
                    rng.gen_range(-1.0..1.0),
                    rng.gen_range(lo..hi),
                    rng.gen_range(0.2..2.0),
                )
            })
            .collect();
        let mut g: Vec<f64> = logs
            .iter()
            .map(|x| {
                bumps
                    .iter()
                    .map(|(a, c, s)| a * (-(x - c).powi(2) / (2.0 * s * s)).exp())
                    .sum()
            })
            .collect();
        let mean = prob.mass.iter().zip(&g).map(|(w, v)| w * v).sum::<f64>() / total;
        g.iter_mut().for_each(|v| *v -= mean);
        let c = Check::le(
            "hardy_poincare_random",
            prob.q_mu(&g),
            gap.beta_tilde * prob.q_nu(&g),
        );
        if worst
            .as_ref()
            .map_or(true, |w| c.rel_slack < w.rel_slack || !c.pass)
        {
            worst = Some(c);
        }
    }
    Ok(worst.expect("count > 0"))
}

/// Re-evaluate the inequality suite on stored snapshots, plus lattice checks
/// of the pointwise lemmas and seeded random Hardy-Poincare tests.
pub fn check(cfg: &RunConfig) -> Result<(), CliError> {
    let dir = out_dir(cfg)?;
    let series = load_series(&dir, cfg)?;
    let snaps: SnapshotFile = read_json(&dir.join(SNAPSHOTS_JSON))?;
    let e = series.meta.exponents()?;
    let eq = series.meta.equilibrium()?;
    let gap = gap_on_grid(&eq, series.meta.eps_sweep[0], cfg.spectral.ell_max)?;
    let mut rep = Report::new(cfg, "check", e);
    rep.constant("beta_tilde", gap.beta_tilde)
        .constant("eps", gap.eps);

    match onset_index(&series, gap.beta_tilde)? {
        Some(k) => {
            let t0 = series.samples[k].tau;
            let constants = window_constants(&e, &series.samples[k..], 0)?;
            let mobility = Mobility {
                p: e.p,
                eps_reg: series.meta.eps_reg,
            };
            let samples = snaps
                .snapshots
                .iter()
                .filter(|s| s.tau >= t0)
                .map(|s| sample_field(s.tau, &s.u, &eq, &mobility, &series.meta.eps_sweep))
                .collect::<dnl_core::Result<Vec<_>>>()?;
            let chain = verify_logsob_chain(&samples, gap.beta_tilde, &constants)?;
            rep.constant("onset_tau", t0)
                .constant("W0", constants.w0)
                .constant("W1", constants.w1)
                .constant("kappa0", constants.kappa0)
                .constant("kappa2", constants.kappa2)
                .constant("delta", constants.delta)
                .constant("eta", constants.eta)
                .constant("lambda_theo", chain.lambda_theo);
            for c in &chain.worst {
                rep.check(c);
            }
            rep.extra("snapshots", &chain.snapshots);
        }
        None => {
            rep.check(&Check {
                name: "chain_deferred".into(),
                pass: false,
                slack: f64::NAN,
                rel_slack: f64::NAN,
            });
            rep.extra(
                "deferred",
                "kappa2 * beta_tilde >= 2 over every late window",
            );
        }
    }

    if e.p > 2.0 {
        let rs: Vec<f64> = (0..100)
            .map(|k| 10f64.powf(-3.0 + 6.0 * (k as f64 + 0.5) / 100.0))
            .collect();
        let xs: Vec<f64> = (0..100).map(|k| -1.0 + 2.0 * k as f64 / 99.0).collect();
        let mut on_axis = f64::INFINITY;
        let mut anywhere = f64::INFINITY;
        for &r in &rs {
            for &x in &xs {
                let v = fp_ratio(r, x, e.p)?;
                anywhere = anywhere.min(v);
                if x == 1.0 {
                    on_axis = on_axis.min(v);
                }
            }
        }
        rep.check(&Check::le("fp_ratio_axis_ge_1", 1.0, on_axis))
            .check(&Check::le("fp_ratio_ge_half", 0.5, anywhere));
    } else if e.p < 2.0 {
        let bound = e.nf().max(e.nf() + 2.0 * (e.q - 2.0));
        let mut worst = 0.0f64;
        for i in 0..100 {
            let r = 10f64.powf(-4.0 + 8.0 * i as f64 / 99.0);
            for j in 0..100 {
                let eps = 10f64.powf(-4.0 + 6.0 * j as f64 / 99.0);
                worst = worst.max(div_weight(r, eps, &e)?.abs());
            }
        }
        rep.check(&Check::le("div_weight_bound", worst, bound));
    }
    let hp = random_hardy_checks(&eq, &gap, cfg.seed, 50)?;
    rep.check(&hp);
    rep.finish(&dir.join(CHECK_JSON))
}
