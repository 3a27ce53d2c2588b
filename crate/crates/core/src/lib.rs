//! Self-similar measures, random walks on the space of unimodular lattices,
//! and counting harnesses for Khintchine-type Diophantine approximation on
//! fractals.
//!
//! Modules:
//! - [`ifs`]: randomized self-similar IFSs and finite-depth samplers of their
//!   stationary measures.
//! - [`homspace`]: group elements, lattice bases, LLL, box enumeration,
//!   Siegel transforms and exact Haar sampling for `d = 1`.
//! - [`walk`]: the random walk on lattices driven by the IFS and the
//!   expanding-translate statistics.
//! - [`liegeom`]: weight spaces, wedge norms, staircase subspaces and
//!   transversality witnesses in `sl_{d+1}`.
//! - [`dioph`]: approximation functions, solution counting and the
//!   block-to-lattice cross-check.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dd;
pub mod dioph;
pub mod error;
pub mod homspace;
pub mod ifs;
pub mod liegeom;
pub mod seed;
pub mod stats;
pub mod walk;

pub use error::{Error, Result};
