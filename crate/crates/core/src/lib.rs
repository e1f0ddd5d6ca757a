//! Simulation of strain-mismatch driven bilayer shells on quad meshes.

// `!(x > 0.0)` rejects NaN along with the out-of-range values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod cli;
pub mod ddg;
pub mod designs;
pub mod energy;
pub mod error;
pub mod material;
pub mod quadmesh;
pub mod simulate;
pub mod solver;

pub use error::{Error, Result};
