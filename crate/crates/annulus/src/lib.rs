//! Pseudo-spectral solver and linear-stability toolkit for the 2D viscous
//! Boussinesq equations on an annulus under a general gravitational potential.
//!
//! The crate is organized around the flow of a study: build a grid
//! ([`spectral`]), construct a hydrostatic equilibrium ([`equilibrium`]),
//! compute its Rayleigh–Taylor growth rate ([`eigensolver`]), evolve
//! perturbations ([`timestepper`]) and verify the energy and relaxation
//! identities along the way ([`diagnostics`]).

pub mod cli;
pub mod diagnostics;
pub mod eigensolver;
pub mod elliptic;
pub mod equilibrium;
pub mod error;
pub mod spectral;
pub mod timestepper;

pub use error::{Error, Result};
