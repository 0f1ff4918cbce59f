//! Process-coupling laboratory for multi-process ODEs.
//!
//! A multi-process problem `dq/dt = Σ X_i(q)` is advanced one step by a
//! coupling scheme that integrates each process separately and combines the
//! increments. This crate measures the local truncation error of such a
//! scheme against a tight-tolerance reference solve, predicts the
//! leading-order error coefficients directly from the scheme structure, and
//! ships the three-process dust life-cycle demo problems (emission, dry
//! removal, turbulent mixing).
//!
//! The crate is `no_std` + `alloc`; IO, file formats, and the CLI live in
//! the companion `splitlab-cli` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod analysis;
pub mod dust;
mod error;
pub(crate) mod linalg;
pub(crate) mod math;
pub mod ode;
pub mod rational;
pub mod scheme;

pub use error::Error;
pub use rational::Rational;

/// `Result` alias used across the crate.
pub type Result<T> = core::result::Result<T, Error>;
