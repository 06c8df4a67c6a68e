use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse error class, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("gamma = 1 (logarithmic profile) is not supported: m = {m}, p = {p}")]
    LogarithmicCase { m: f64, p: f64 },
    #[error("Barenblatt mass diverges: mass exponent 1/(gamma-1) + n/q = {exponent} >= 0")]
    DivergentMass { exponent: f64 },
    #[error("argument outside the domain of `{op}`: {detail}")]
    Domain { op: &'static str, detail: String },
    #[error("sandwich ordering violated: need D0 >= D* >= D1 > 0, got D0 = {d0}, D* = {dstar}, D1 = {d1}")]
    SandwichOrdering { d0: f64, dstar: f64, d1: f64 },
    #[error("initial data leaves the Barenblatt sandwich at r = {radius}")]
    SandwichViolation { radius: f64 },
    #[error("singular weight at the origin (eps = 0 with p = {p} < 2)")]
    SingularWeight { p: f64 },
    #[error("perturbation is not mass-neutral: integral {integral} vs scale {scale}")]
    NonZeroMean { integral: f64, scale: f64 },
    #[error("cannot parse {what}: {detail}")]
    Parse { what: &'static str, detail: String },
    #[error("non-positive density {value} in cell {cell}")]
    NonPositive { cell: usize, value: f64 },
    #[error("non-finite value in {context} at tau = {tau}")]
    NonFinite { context: &'static str, tau: f64 },
    #[error("quotient w = {w} leaves the sandwich tolerance at r = {radius}, tau = {tau}")]
    SandwichBreach { radius: f64, tau: f64, w: f64 },
    #[error("time step underflow at tau = {tau} (dt = {dt})")]
    StepUnderflow { tau: f64, dt: f64 },
    #[error("{what} did not converge after {iterations} iterations")]
    NonConvergence {
        what: &'static str,
        iterations: usize,
    },
    #[error("indefinite assembly in sector {ell}: {detail}")]
    Indefinite { ell: usize, detail: String },
    #[error("fit failed for `{column}`: {reason}")]
    Fit { column: String, reason: String },
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::InvalidParameter { .. }
            | Error::LogarithmicCase { .. }
            | Error::DivergentMass { .. }
            | Error::Domain { .. }
            | Error::SandwichOrdering { .. }
            | Error::SandwichViolation { .. }
            | Error::SingularWeight { .. }
            | Error::NonZeroMean { .. }
            | Error::Parse { .. } => ErrorKind::Validation,
            Error::NonPositive { .. }
            | Error::NonFinite { .. }
            | Error::StepUnderflow { .. }
            | Error::SandwichBreach { .. }
            | Error::NonConvergence { .. }
            | Error::Indefinite { .. }
            | Error::Fit { .. } => ErrorKind::Numerical,
        }
    }
}
