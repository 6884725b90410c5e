//! Construction and verification of holonomic hypersurfaces in the
//! 4-dimensional space forms Q⁴_s(c).

pub mod ambient;
pub mod diff;
pub mod error;
pub mod frame;
pub mod gallery;
pub mod grid;
pub mod immersion;
pub mod report;
pub mod ribaucour;
pub mod sweep;
pub mod triples;
pub mod verify;

pub use error::{Error, Result};
