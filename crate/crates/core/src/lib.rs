//! Simulation and analysis of dynamical-decoupling pulse sequences acting
//! on an ensemble of independent spin-1/2 systems with systematic pulse
//! errors.
//!
//! * [`rotation`]: SU(2) rotations and Bloch-vector states.
//! * [`error_model`]: per-spin detuning, angle and axis errors.
//! * [`sequence`]: PDD, SDD, CDD and CPMG pulse programs.
//! * [`simulator`]: cycle propagators and ensemble fidelities.
//! * [`analysis`]: numerical checks of the first-order effective rotations.
//! * [`bloch_rd`]: finite-pulse mean-field Bloch dynamics with radiation damping.

pub mod analysis;
pub mod bloch_rd;
pub mod error;
pub mod error_model;
pub mod rotation;
pub mod sequence;
pub mod simulator;
pub mod vector;

pub use error::{Error, Result};
pub use error_model::{EdgeErrorCoupling, ErrorParameters, ErrorRealization, GAMMA_E};
pub use rotation::{compose, AxisAngle, Rotation, SpinState};
pub use sequence::{Instruction, PulseAxis, PulseProgram, Variant};
pub use simulator::{EnsembleConfig, FidelityRecord, InitialState};
