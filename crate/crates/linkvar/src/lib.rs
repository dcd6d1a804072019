//! Numerical linking-minimax solver and verification suite for strongly
//! indefinite variational problems with a singular cylindrical potential.
//!
//! The crate discretizes `-Laplace + a/r^2 + V(x)` in reduced cylindrical
//! coordinates, builds the spectral splitting `X = X+ (+) X-`, certifies the
//! constants behind the linking geometry (kappa, mu0, growth and lower
//! constants, the lambda threshold, linking radii, the Cerami-boundedness
//! constant K), searches for nontrivial critical points of the energy by a
//! linking minimax loop with Gauss-Newton polish, and checks the Maxwell
//! reconstruction identities for the cylindrically symmetric ansatz.

pub mod cli;
pub mod config;
pub mod error;
pub mod formats;
pub mod functional;
pub mod geometry;
pub mod grid;
pub mod maxwell;
pub mod nonlinearity;
pub mod report;
pub mod solver;
pub mod spectral;
pub mod toylink;
pub mod util;

pub use error::{Error, Result};
