pub mod dataset;
pub mod degrade;
mod error;
pub mod iqa;
pub mod losses;
pub mod phantom;
pub mod seed;
pub mod semantic;
pub mod spectral;
pub mod tomo;

pub use error::{Error, Result};
