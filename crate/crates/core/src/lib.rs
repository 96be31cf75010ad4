pub mod datagen;
pub mod edgecount;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod hetero;
pub mod io;
pub mod seeds;
pub mod theory;

pub use error::{Error, Result};
