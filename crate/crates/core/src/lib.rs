//! Two four-level atoms in a lossy cavity: conditional (no-jump) dynamics,
//! the cavity decoherence-free subspace, adiabatic transfer and two-qubit
//! phase gates.

pub mod dynamics;
pub mod error;
pub mod gates;
pub mod hilbert;
pub mod model;
pub mod pulses;
pub mod sweeps;

pub use error::{Error, Result};
pub use num_complex::Complex64;
