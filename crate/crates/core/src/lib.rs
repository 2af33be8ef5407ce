//! Dynamical control of decoherence for driven two-level systems.
//!
//! The crate computes modulation-dependent relaxation and dephasing rates of
//! qubits coupled to harmonic thermal baths, integrates the resulting
//! generalized Bloch equations and the Born master equation, evaluates
//! multiqubit decoherence matrices and entanglement fidelities, and checks
//! the second-order predictions against an exact few-mode spin-boson
//! simulation.
//!
//! All quantities are dimensionless with `ħ = 1`: frequencies are angular
//! frequencies in some unit `ω_u`, times are in units of `1/ω_u`.

pub mod bath;
pub mod bloch;
pub mod cli;
pub mod config;
pub mod error;
pub mod io;
pub mod modulation;
pub mod multipartite;
pub mod ode;
pub mod oracle;
pub mod quad;
pub mod rates;
pub mod special;

pub use error::{Error, Result};
pub use num_complex::Complex64;
