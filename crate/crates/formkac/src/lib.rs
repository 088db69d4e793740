//! Monte Carlo engine and deterministic oracle suite for heat semigroups on
//! differential forms (and spinors) over model manifolds with reflecting
//! boundary.
//!
//! The crate simulates horizontal reflecting Brownian motion on a fixed
//! catalog of constant-curvature model geometries, evolves the multiplicative
//! functional that damps form coefficients by curvature in the interior and
//! by the boundary shape operator plus normal projection at the boundary, and
//! estimates the resulting semigroup expectations. A deterministic oracle
//! layer (image-method kernels, a Crank-Nicolson line solver, finite
//! difference exterior calculus, quadrature identities) pins every estimate
//! that admits an independent route.

pub mod config;
pub mod development;
pub mod error;
pub mod estimators;
pub mod form_algebra;
pub mod oracles;
pub mod pathdump;
pub mod report;
pub mod functional;
pub mod geometry;
pub mod rng;
pub mod runner;
pub mod spin;

pub use error::{Error, Result};
