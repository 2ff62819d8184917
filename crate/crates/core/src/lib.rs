//! Periodic orbits of the planar forced Kepler problem: averaging in Poincaré
//! coordinates, Newton-shooting continuation in the forcing amplitude, and
//! linear stability of the continued orbits from their monodromy matrices.

pub mod angle;
pub mod averaging;
pub mod circular;
pub mod config;
pub mod continuation;
pub mod error;
pub mod flow;
pub mod forcing;
pub mod io;
pub mod kepler;
pub mod pipeline;
pub mod symplectic;

pub use error::{Error, Result};
