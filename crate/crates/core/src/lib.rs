//! Pseudo-generic points for the conformal and invariant measures on Julia
//! sets of hyperbolic quadratic maps `T(z) = z^2 + c`.
//!
//! The pipeline: find the repelling fixed point and build a ball cover from
//! its preimages ([`lattice`]), estimate the Hausdorff dimension and the
//! invariant density with the transfer operator ([`transfer`]), pick the
//! lattice point whose orbit best satisfies the discretized conformal
//! equation ([`selector`]), and check it with Birkhoff averages
//! ([`ergodic`]).

pub mod cli;
pub mod dynamics;
pub mod ergodic;
pub mod error;
pub mod lattice;
pub mod rng;
pub mod selector;
pub mod transfer;

pub use dynamics::{ComplexPoint, QuadraticMap};
pub use error::{Error, Result};
pub use lattice::{borel_centers, find_repelling_fixed_point, make_lattice, BorelCover, Lattice};
pub use transfer::{density, density_cache, estimate_dimension, transfer_iterate, DensityCache};
