//! Weingarten calculus and random quantum channel spectra.
//!
//! * [`perm`] permutations of `S_m`, cycle types, Möbius values, the wiring
//!   permutations of a product of two channels.
//! * [`weingarten`] exact and asymptotic Weingarten functions and polynomial
//!   Haar integrals.
//! * [`moments`] exact permutation sums for `E tr Z^p`, their pinched variant
//!   and the exponent minimization problems behind the asymptotics.
//! * [`montecarlo`] Haar sampling, channels, spectra and ensembles.
//! * [`freeprob`] Marchenko-Pastur law, entropy integrals and entropy
//!   predictions.

pub mod error;
pub mod freeprob;
pub mod moments;
pub mod montecarlo;
pub mod perm;
pub mod weingarten;

pub use error::{Error, Result};
pub use perm::{compose, CycleType, Permutation};
pub use weingarten::WgTable;
