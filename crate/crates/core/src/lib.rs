//! Conditional geometric phase gates between two atoms sharing a cavity mode.
//!
//! The crate is organised bottom up: [`fock`] holds truncated single-mode
//! operators, [`geompath`] the phase-space path algebra, [`model`] the atom
//! and cavity Hamiltonians, [`dynamics`] the propagators and [`gate`] the
//! gate-level scoring.

pub mod dynamics;
pub mod error;
pub mod fock;
pub mod format;
pub mod gate;
pub mod geompath;
pub mod linalg;
pub mod model;

pub use dynamics::{JointState, PropagationOptions, PropagationReport};
pub use error::{Error, Result};
pub use fock::{ComplexAmplitude, FockDim, ModeOperator};
pub use gate::{GateOptions, GateReport, Preset, PI_GATE};
pub use geompath::{DisplacementPath, PathPhaseResult};
pub use linalg::C64;
pub use model::{JointOperator, JointSpace, ModelKind, QubitRow, SystemParams};
