//! Constrained Hamiltonian mechanics of a massive ball rolling without
//! slipping down an incline, treated side by side in two ways:
//!
//! * classically, through a degenerate Legendre transform, a staged
//!   constraint-consistency loop, constraint classification and Dirac
//!   brackets ([`mechanics`], [`dynamics`]);
//! * quantum mechanically, through the commutator algebra the Dirac brackets
//!   induce ([`operator_quantize`]) and through the Airy-function spectra of
//!   the equivalent one-dimensional linear potentials ([`airy`],
//!   [`quantum_spectrum`]).
//!
//! The point of the exercise is that the two quantisations agree: reducing
//! the constrained operator algebra to its physical subspace reproduces the
//! one-dimensional Hamiltonian whose eigenproblem the Airy machinery solves.

pub mod airy;
pub mod cli;
pub mod dynamics;
pub mod error;
mod linalg;
pub mod mechanics;
pub mod operator_quantize;
pub mod output;
pub mod phase_algebra;
pub mod quantum_spectrum;

pub use error::{Error, Result};
