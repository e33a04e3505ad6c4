//! Simulation and analysis of ¹³C nuclear spin pairs near an NV center.
//!
//! The crate is organised by physical subsystem:
//!
//! * [`geometry`] builds the diamond lattice, samples ¹³C baths and evaluates
//!   dipolar and hyperfine couplings.
//! * [`noisefield`] turns baths into the classical noise strength `b`, generates
//!   Ornstein-Uhlenbeck noise traces and estimates fields from external sources.
//! * [`decaymodels`] holds the closed-form coherence envelopes for every noise regime.
//! * [`montecarlo`] propagates the pseudo-spin under sampled noise.
//! * [`spinsys`] assembles the full NV + two-carbon Hamiltonian and diagonalises it.
//! * [`measurement`] simulates repeated non-destructive readout, heralding,
//!   threshold calibration and the parity-measurement entanglement protocol.
//! * [`analysis`] provides the Fourier transform and the model fits.
//!
//! Frequencies cross every public boundary as ordinary frequencies in Hz.
//! Factors of 2π are applied only inside propagators and closed-form envelopes.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod consts;
pub mod decaymodels;
pub mod ensemble;
mod error;
pub mod geometry;
pub mod linalg;
pub mod measurement;
pub mod montecarlo;
pub mod noisefield;
pub mod spinsys;

pub use error::{Error, Result};
