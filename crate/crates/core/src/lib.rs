//! Simulation toolkit for a two-atom "entanglement qubot": a Rydberg-dressed
//! nucleus whose spin-dependent motion drives corrector sites that undo
//! single-qubit errors.
//!
//! * [`quantum`]: spin and Fock-space linear algebra.
//! * [`logical`]: Pauli bookkeeping of the error-correction cycle and the
//!   dipolar equilibrium solver.
//! * [`potentials`]: dressed-Rydberg spin patterns and Bell-state landscapes.
//! * [`mcwf`]: coupled spin-motion Monte Carlo wavefunction dynamics.
//! * [`ensemble`]: ensemble statistics, analytic references and sweeps.
//! * [`lindblad`]: small dense master-equation integrator used as an oracle.

// `!(x > 0.0)` is the NaN-rejecting form of a positivity check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ensemble;
pub mod error;
pub mod lindblad;
pub mod logical;
pub mod mcwf;
pub mod potentials;
pub mod quantum;

pub use error::{Error, Result};
