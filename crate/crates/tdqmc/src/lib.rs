//! Time-dependent quantum Monte Carlo for two Coulomb-interacting electrons
//! in one dimension.
//!
//! Each electron is represented by an ensemble of walkers, every walker
//! carrying its own guide wave. The guide waves obey coupled one-dimensional
//! Schrödinger equations in which the electron-electron potential is replaced
//! by a kernel-weighted average over the partner ensemble; walkers move along
//! de Broglie-Bohm trajectories of their guide wave. A single width parameter
//! per electron interpolates between mean-field (very wide kernel) and fully
//! correlated (very narrow kernel) dynamics.
//!
//! The crate also ships a numerically exact two-electron grid solver used to
//! validate the Monte Carlo results, plus analysis tools for reduced density
//! matrices, coherence measures, and interference-fringe statistics.

// Validation deliberately writes `!(v > 0.0)` instead of `v <= 0.0`: the
// negated form is true for NaN, so non-numbers fail the checks instead of
// slipping through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod config;
pub mod engine;
pub mod error;
pub mod exact;
mod fft;
pub mod grid;
pub mod output;
pub mod pipeline;
pub mod potentials;
pub mod rng;

pub use error::{Error, Result};
