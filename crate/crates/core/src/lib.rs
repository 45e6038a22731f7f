//! Open-system dynamics of a spin-j Majorana (Landau-Zener) sweep.
//!
//! A spin `j` under `H(t) = kappa t Jz + sqrt(2) Omega Jx` is swept through the
//! avoided crossing while coupled to a thermal bath through `Jz` or `Jx`. The
//! crate builds the spin algebra, the Davies-Spohn master equation, an adaptive
//! RK4 propagator, and the experiments that test whether the spin-j dynamics
//! factorizes into `2j` independent spin-1/2 copies.

pub mod dissipator;
pub mod config;
pub mod error;
pub mod experiments;
pub mod factorization;
pub mod integrator;
pub mod linalg;
pub mod model;
pub mod picture;
pub mod spin;

pub use error::{Error, Result};
