//! Collective mechanics of laser-illuminated two-dimensional atom arrays.
//!
//! Atoms sit on a square lattice in the `xy` plane and move along `z` inside
//! individual harmonic traps. Light scattered between atoms renormalizes the
//! single-atom resonance (cooperative shift and width) and couples the
//! longitudinal motion of different atoms through laser-induced dipole-dipole
//! spring constants. This crate computes:
//!
//! - the free-space dyadic Green's tensor and its linearized force kernel ([`greens`]),
//! - cooperative lattice sums and scalar observables ([`cooperative`]),
//! - every coefficient of the collective diffusion equation ([`coefficients`]),
//! - collective mode spectra, stability and gaps ([`modes`]),
//! - closed-form moments and a Monte Carlo Langevin integrator ([`dynamics`]).
//!
//! # Units
//!
//! Lengths are measured in laser wavelengths `λ`, rates in the bare linewidth
//! `γ`, and `ħ = 1`, so energies come out in units of `ħγ`. The wavenumber is
//! `q = 2π`. The only dimensionful input is `ħγ/E_R`, held by
//! [`params::UnitSystem`], which fixes the atomic mass.

pub mod checks;
pub mod coefficients;
pub mod cooperative;
pub mod dynamics;
mod error;
pub mod exec;
pub mod greens;
mod linalg;
pub mod modes;
pub mod params;

pub use error::{Error, Result};
pub use exec::Execution;

/// Laser wavenumber in internal units (`λ = 1`).
pub const Q: f64 = 2.0 * std::f64::consts::PI;

/// Library version recorded in output manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
