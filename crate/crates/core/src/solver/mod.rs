//! Radial finite-volume solver for the rescaled equation
//! `u_tau = div(u grad c*(grad F'(u)) + u y)`.

pub mod equilibrium;
pub mod grid;
pub mod init;
pub mod scheme;
pub mod simulate;
pub mod stepper;
pub mod transform;

pub use equilibrium::Equilibrium;
pub use grid::RadialGrid;
pub use init::{build_initial_data, discrete_dstar, InitialData, Shape};
pub use scheme::{FluxWork, Mobility, Scheme};
pub use simulate::{sample_field, simulate, SimulationConfig, SimulationOutput, Snapshot};
pub use stepper::{DensityField, SandwichGuard, StepPolicy, Stepper, TimeScheme, TimeState};
pub use transform::{to_original_variables, to_rescaled_variables, OriginalSnapshot};
