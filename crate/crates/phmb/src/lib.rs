//! Port-Hamiltonian modeling, verification, and simulation of rigid
//! multibody systems in redundant coordinates.
//!
//! A [`PhSystem`] bundles the position-dependent kinematics map, a constant
//! mass matrix, gyroscopic and port direction matrices, position and
//! velocity constraints, potential energy, and a dissipation map. On top of
//! that data model the crate provides
//!
//! * [`verify`]: numerical checks of the structural axioms: the assembled
//!   interconnection structure is a Dirac structure, its constrained
//!   reduction keeps constant dimension, the energy storage is locally a
//!   Lagrangian submanifold, the dissipation is passive, and user-supplied
//!   derivatives agree with finite differences;
//! * [`sim`]: consistent initialization, per-step saddle-point solves,
//!   an implicit-midpoint integrator with coordinate projection against
//!   constraint drift, and energy/power-balance accounting;
//! * [`interconnect`]: power-preserving coupling of two systems through
//!   selected ports, with the rank test that keeps the coupling inside the
//!   model class;
//! * [`models`]: built-in systems: a differential-drive robot (full and
//!   reduced), a gimbal-mounted gyroscope, and a slider-crank mechanism
//!   assembled by interconnection.

pub mod error;
pub mod interconnect;
pub mod linalg;
pub mod models;
pub mod sample;
pub mod sim;
pub mod system;
pub mod verify;

pub use error::PhError;
pub use interconnect::{CoupledSystem, CouplingSpec};
pub use sample::SampleSet;
pub use sim::{SimConfig, Trajectory};
pub use system::{Multipliers, PhSystem, PortValues, State};
