//! Exact state-vector simulation of a Heisenberg spin chain thermalizing to
//! the non-Abelian thermal state (NATS).
//!
//! Conventions used throughout the crate:
//!
//! * Qubits are indexed from 0. Qubit 0 is the most significant bit of a
//!   computational-basis index.
//! * Bit value 0 is `|z+>` (σ_z eigenvalue +1) and bit value 1 is `|z->`.
//! * Spin operators are bare Paulis; factors of ħ/2 are dropped.
//! * Entropies are in nats.

pub mod error;
pub mod experiments;
pub mod hamiltonian;
pub mod linalg;
pub mod propagation;
pub mod spin;
pub mod state_prep;
pub mod thermal;
pub mod tomography;

pub use error::{Error, Result};
pub use hamiltonian::{Bond, Boundary, ChainSpec, HamiltonianAction};
pub use num_complex::Complex64 as C64;
pub use propagation::{Engine, PropagatorConfig};
pub use spin::{CycleDirection, PauliAxis, PauliLabel, PauliString, StateVector};
pub use state_prep::{AmcParameters, PrepPattern, SingleQubitState, SoftOutcome};
pub use thermal::{DensityMatrix, Ensemble, ThermalParams};
pub use tomography::{FrequencyTable, MeasurementRecord};
