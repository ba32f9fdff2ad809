pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod fd;
pub mod geometry;

pub mod integrators;
pub mod oracles;
pub mod recipe;
pub mod samplers;
pub mod verify;

pub use error::{Error, Result};
