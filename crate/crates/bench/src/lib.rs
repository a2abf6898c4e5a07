//! Shared fixtures for the criterion benchmarks.

use ctdb_core::phantom::make_phantom;
use ctdb_core::tomo::{hu_to_attenuation, AttenuationMap, Geometry, Image, PhysicsConstants};

/// Phantom, its attenuation map and the dense acquisition geometry.
pub struct Fixture {
    pub image: Image,
    pub map: AttenuationMap,
    pub geometry: Geometry,
}

pub fn fixture(size: usize) -> Fixture {
    let image = make_phantom(size, 7).expect("valid phantom size");
    let map = hu_to_attenuation(&image, &PhysicsConstants::default()).expect("finite HU");
    let geometry = Geometry::full(image.grid()).expect("square grid");
    Fixture {
        image,
        map,
        geometry,
    }
}
