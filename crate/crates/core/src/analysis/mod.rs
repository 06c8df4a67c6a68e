//! Rate extraction and theorem-level checks on sampled runs.

pub mod fit;
pub mod series;
pub mod verify;

pub use fit::{fit_exponential, fit_values, least_squares, FitStatus, RateFit, WindowPolicy};
pub use series::{read_csv, DiagnosticsSeries, Sample, SeriesMeta, CSV_COLUMNS};
pub use verify::{
    dissipation_identity, onset_index, theo_sweep, verify_logsob_chain, verify_run,
    verify_theorem1, window_constants, ChainReport, Check, DissipationReport, RunVerification,
    SnapshotChecks, TheoCandidate, Theorem1Report, VerifyOptions,
};
