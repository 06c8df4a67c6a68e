use crate::exponents::Exponents;

/// Snapshot expressed in the original variables `(t, x, rho)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OriginalSnapshot {
    pub t: f64,
    /// Scale factor `R(t) = (1 + delta t)^{1/delta} = e^tau`.
    pub scale: f64,
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    /// Shell volumes in `x`, i.e. `R^n w_i`.
    pub volumes: Vec<f64>,
}

/// `t = (e^{delta tau} - 1)/delta`.
pub fn time_from_tau(e: &Exponents, tau: f64) -> f64 {
    (e.delta_p * tau).exp_m1() / e.delta_p
}

/// Inverse of `time_from_tau`.
pub fn tau_from_time(e: &Exponents, t: f64) -> f64 {
    (e.delta_p * t).ln_1p() / e.delta_p
}

/// `R(t) = (1 + delta t)^{1/delta}`.
pub fn scale_factor(e: &Exponents, t: f64) -> f64 {
    ((e.delta_p * t).ln_1p() / e.delta_p).exp()
}

/// Map rescaled values `u(tau, y)` to `rho(t, x) = R^{-n} u(tau, x/R)`.
pub fn to_original_variables(
    e: &Exponents,
    tau: f64,
    y: &[f64],
    u: &[f64],
    volumes: &[f64],
) -> OriginalSnapshot {
    let t = time_from_tau(e, tau);
    let scale = tau.exp();
    let rn = scale.powi(e.n as i32);
    OriginalSnapshot {
        t,
        scale,
        x: y.iter().map(|v| v * scale).collect(),
        rho: u.iter().map(|v| v / rn).collect(),
        volumes: volumes.iter().map(|w| w * rn).collect(),
    }
}

/// Map back to `(tau, y, u)`.
pub fn to_rescaled_variables(e: &Exponents, s: &OriginalSnapshot) -> (f64, Vec<f64>, Vec<f64>) {
    let tau = tau_from_time(e, s.t);
    let scale = scale_factor(e, s.t);
    let rn = scale.powi(e.n as i32);
    (
        tau,
        s.x.iter().map(|v| v / scale).collect(),
        s.rho.iter().map(|v| v * rn).collect(),
    )
}
