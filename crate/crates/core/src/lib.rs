//! Exact-diagonalization toolkit for symmetry-resolved trace distances in
//! SU(2)-symmetric spin-1/2 chains.
//!
//! The pipeline runs bottom up:
//!
//! - [`sector_basis`]: fixed-magnetization configurations and reflection parity,
//! - [`lattice_operators`]: sparse J1-J2 Hamiltonian, `S²`, `S_A²`,
//! - [`spectral`]: full dense diagonalization with `2S` labels,
//! - [`su2_resolution`]: reduced density matrices split by subsystem spin,
//! - [`distances`]: probability and configurational trace distances per pair,
//! - [`micro_stats`]: microcanonical-window averages and their bound,
//! - [`scaling_fits`]: exponential versus power-law finite-size fits,
//! - [`pipeline`]: caching, CSV/SVG output and the verification suite.

pub mod distances;
pub mod error;
pub mod lattice_operators;
pub mod micro_stats;
pub mod oracle;
pub mod pipeline;
pub mod scaling_fits;
pub mod sector_basis;
pub mod spectral;
pub mod su2_resolution;

pub use error::{Error, Result};
