//! Meshless reservoir simulation on point clouds.
//!
//! Derivative stencils come from weighted least squares on each node's
//! neighborhood, node control volumes from a small least-squares problem over
//! neighbor pairs, and the result is a conservative two-point-like flux
//! network for fully implicit oil-water flow.

pub mod assembler;
pub mod cli;
pub mod config;
pub mod control_volume;
pub mod error;
pub mod flow;
pub mod gfdm;
pub mod io;
pub mod lsq;
pub mod pointcloud;
pub mod setup;
pub mod solver;
pub mod sparse;
pub mod tpfa;

pub use error::{Error, Result};
