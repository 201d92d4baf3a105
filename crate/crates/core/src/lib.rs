//! Fictitious-domain finite elements for two-dimensional linear elastic media
//! containing an internal pressurized crack.
//!
//! The crack `Γ_T` is extended by an artificial interface `Γ₀` so that the
//! domain splits into two sides `Ω⁺` and `Ω⁻`. Each side carries its own
//! displacement field, discretized on a structured background mesh that does
//! not conform to the interface; basis functions cut by the interface are
//! restricted (not enriched) to the side they serve. Displacement continuity
//! across `Γ₀` is imposed weakly by a Lagrange multiplier, optionally with a
//! Barbosa-Hughes type stabilization. The saddle-point system is solved either
//! monolithically or by an Uzawa conjugate gradient on the dual functional.
//!
//! The crate is `no_std` (with `alloc`). File formats, the command line driver
//! and parallel sweeps live in the companion `fdcrack` crate.
#![cfg_attr(not(test), no_std)]

extern crate alloc;

mod math;

pub mod assembly;
pub mod error;
pub mod extension3d;
pub mod levelset;
pub mod manufactured;
pub mod material;
pub mod mesh;
pub mod postproc;
pub mod problem;
pub mod quadrature;
pub mod solver;
pub mod spaces;
pub mod sparse;

pub use error::{Error, Result};

/// A point (or vector) of the plane.
pub type Point = [f64; 2];
