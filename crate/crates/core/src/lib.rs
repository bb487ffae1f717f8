pub mod dynamics;
pub mod error;
pub mod grid;
pub mod kernel;
pub mod omt;
pub mod partial;
pub mod spectral;

pub use error::{Error, Result};
