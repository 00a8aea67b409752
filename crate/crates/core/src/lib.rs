pub mod action;
pub mod certificate;
pub mod error;
pub mod hamiltonian;
pub mod orbits;
pub mod profile;
pub mod report;
pub mod torus;

pub use error::{Error, Result};
