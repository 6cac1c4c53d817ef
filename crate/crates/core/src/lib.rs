//! Curved high-order Lagrange finite elements for the Ventcel eigenvalue
//! problem on smooth planar domains.
//!
//! The pipeline is: a [`geometry::SmoothDomain`] is meshed by
//! [`mesh::generate_star_mesh`], curved to geometric order `r` with
//! [`mesh::curve_mesh`], equipped with a `P^k` space
//! ([`assembly::FeSpace`]), assembled into sparse operators, and solved with
//! the shift-invert Lanczos driver in [`eigsolve`]. [`analysis`] measures
//! errors on the exact domain through the element maps of [`lift`] and runs
//! refinement studies.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod analysis;
pub mod assembly;
pub mod cli;
pub mod eigsolve;
mod error;
pub mod geometry;
pub mod lift;
pub mod mesh;
pub mod refelem;

pub use error::{Error, Result};

/// A point (or vector) of the plane.
pub type Point2 = nalgebra::Vector2<f64>;
/// A 2x2 real matrix.
pub type Mat2 = nalgebra::Matrix2<f64>;
