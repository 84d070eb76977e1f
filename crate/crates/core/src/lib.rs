//! Quench dynamics of spin-1/2 chains with matrix product states, and
//! distance-based diagnostics of subsystem non-Markovianity.
//!
//! The pipeline is: [`model`] builds the Hamiltonian and Trotter gates,
//! [`dmrg`] prepares the pre-quench ground state, [`tebd`] evolves it and
//! records reduced density matrices, and [`analysis`] turns the record into
//! distance series, revival degrees and extrema timescales. [`ed_oracle`] is
//! a dense reference for short chains.

pub mod analysis;
pub mod density;
pub mod dmrg;
pub mod ed_oracle;
pub mod error;
pub mod linalg;
pub mod model;
pub mod mps;
pub mod tebd;

pub use density::DensityMatrix;
pub use error::{Error, Result};
pub use model::{build_hamiltonian, build_trotter_gates, HamiltonianParams, HamiltonianSpec, TrotterScheme};
pub use mps::{Mps, TruncationPolicy};
