//! Edge-diffraction modeling per Keller's Geometrical Theory of Diffraction.
//!
//! The crate is organized around four layers:
//!
//! * [`geometry`]: points, unit vectors, planar grids, Keller-cone residuals,
//!   conic signatures on a receiver aperture, and bisector steering.
//! * [`forward`]: complex field synthesis on a receiver grid from a scene of
//!   transmitters, diffracting edges, and point scatterers, with background
//!   subtraction.
//! * [`imaging`]: inversion of background-subtracted power into an edge image
//!   via coherent summation over conic signatures and orientation hypothesis
//!   testing.
//! * [`lattice`]: synthesis of an edge-element metasurface that focuses RF
//!   energy at chosen points, including Metropolis partitioning of elements
//!   among multiple targets.
//!
//! The crate is `no_std` compatible (with `alloc`); enable the default `std`
//! feature for `std::error::Error` integration.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

pub mod error;
pub mod forward;
pub mod geometry;
pub mod imaging;
pub mod lattice;
pub mod presets;

pub use error::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;
