//! Layer-wise bias directions for layered embedding models.
//!
//! Extracts per-layer gender directions by PCA over definition-pair
//! difference vectors (independently per layer, or iteratively with the
//! previous layer's direction projected out before each layer), removes them
//! by perpendicular projection during the forward pass, and measures the
//! effect with template-corpus equity statistics, threshold separability and
//! trained probes.

pub mod eec;
pub mod error;
pub mod fixtures;
pub mod gendata;
pub mod intensity;
pub mod linalg;
pub mod model;
pub mod neural;
pub mod subspace;

pub use error::{Error, Result};
