//! Parallel-beam forward model, filtered backprojection and HU conversion.

mod fbp;
mod geometry;
pub mod io;
mod projector;
mod raster;

pub use fbp::fbp;
pub use geometry::{standard_detector_count, uniform_angles, Geometry, Sinogram, FULL_VIEW_COUNT};
pub use projector::radon;
pub use raster::{
    attenuation_to_hu, hu_to_attenuation, AttenuationMap, Image, ImageGrid, Mask,
    PhysicsConstants, Raster, AIR_HU,
};
