//! Pseudospectral solver for a fourth-order dissipative magnetisation /
//! phase-field system on boxes with periodic or homogeneous Neumann
//! boundaries, plus an independent low-mode Galerkin reference solver and
//! diagnostics for energy, dissipation and norm estimates.
//!
//! The crate is `no_std` (it needs `alloc`).

#![no_std]

extern crate alloc;

pub mod diagnostics;
pub mod error;
pub mod fft;
pub mod galerkin;
pub mod model;
pub mod random;
pub mod spectral;
pub mod stepper;

pub use error::{Error, Result};
pub use galerkin::{GalerkinBasis, GalerkinSystem};
pub use model::{Current, CurrentWave, Model, ModelParams, Source};
pub use spectral::{Boundary, Dealiasing, Domain, Field, Grid, Parity, Spectrum};
pub use stepper::{integrate, step, Scheme, Stepper, StepperConfig};
