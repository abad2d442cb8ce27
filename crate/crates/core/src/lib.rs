//! SCRaWl: random-walk neural networks on simplicial complexes.
//!
//! The crate is organised bottom-up:
//!
//! - [`complex`]: simplicial complexes, boundary maps, adjacency tables and file formats.
//! - [`walk`]: seeded random walks on `k`-simplices.
//! - [`features`]: walk feature matrices with identity and adjacency bits.
//! - [`nn`]: a small reverse-mode autodiff core with 1D convolutions, pooling, Adam.
//! - [`model`]: the layered architecture with per-order modules and skip connections.
//! - [`data`]: loaders, imputation/classification tasks, metrics, synthetic generators.
//! - [`run`]: configuration, training/evaluation runs, ablations and checkpoints.

pub mod complex;
pub mod data;
pub mod features;
pub mod model;
pub mod nn;
pub mod rng;
pub mod run;
pub mod sparse;
pub mod walk;

pub use complex::{build_complex, SimplexId, SimplicialComplex};
