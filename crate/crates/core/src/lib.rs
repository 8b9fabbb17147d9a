//! Discrete free-discontinuity (weak-membrane) energies on stochastic lattices.
//!
//! The crate covers the whole chain: admissible point sets ([`lattice`]), directed
//! edge sets ([`geometry`]), multiset potentials ([`potential`]), the discrete
//! energies ([`energy`]), their minimization ([`solver`]), bulk and surface cell
//! problems for the homogenized coefficients ([`homogenize`]), and image-driven
//! pipelines ([`image`], [`fidelity`], [`pipeline`]).

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod config;
pub mod energy;
pub mod error;
pub mod fidelity;
pub mod geometry;
pub mod homogenize;
pub mod image;
pub mod lattice;
pub mod par;
pub mod pipeline;
pub mod potential;
pub mod solver;
pub mod spatial;

pub use error::{Error, Result};
