//! Numerical toolkit for the BCS gap equation with general radial pair
//! potentials: self-consistent solution of the nonlinear gap equation, the
//! equivalent linear spectral criterion for pairing instability, and the
//! critical temperature located by two independent routes (eigenvalue sign
//! change and Birman-Schwinger norm crossing), together with the explicit
//! analytic bounds that constrain it.
//!
//! Units: hbar = 2m = 1, so momentum squared carries energy units.

pub mod critical;
pub mod discretize;
pub mod error;
pub mod gap;
pub mod interp;
pub mod linear;
pub mod potential;
pub mod quad;
pub mod selftest;
pub mod special;
pub mod symbols;

pub use error::{Error, Result};
pub use symbols::{Beta, ThermoParams};
