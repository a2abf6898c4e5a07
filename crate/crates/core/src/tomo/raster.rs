use std::ops::{Deref, DerefMut};

use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};

/// HU value assigned to air and to everything outside the reconstruction circle.
pub const AIR_HU: f64 = -1000.0;

/// A row-major 2-D grid of samples with isotropic pixel spacing.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    height: usize,
    width: usize,
    pixel_spacing_mm: f64,
    values: Vec<f64>,
}

impl Raster {
    pub fn new(height: usize, width: usize, pixel_spacing_mm: f64, values: Vec<f64>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidParameter(format!(
                "raster dimensions must be positive, got {height}x{width}"
            )));
        }
        if !(pixel_spacing_mm.is_finite() && pixel_spacing_mm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "pixel spacing must be positive, got {pixel_spacing_mm}"
            )));
        }
        if values.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "expected {} values for a {height}x{width} raster, got {}",
                height * width,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self {
            height,
            width,
            pixel_spacing_mm,
            values,
        })
    }

    pub fn filled(height: usize, width: usize, pixel_spacing_mm: f64, value: f64) -> Result<Self> {
        Self::new(height, width, pixel_spacing_mm, vec![value; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn pixel_spacing_mm(&self) -> f64 {
        self.pixel_spacing_mm
    }

    pub fn grid(&self) -> ImageGrid {
        ImageGrid {
            height: self.height,
            width: self.width,
            pixel_spacing_mm: self.pixel_spacing_mm,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the samples. Callers must keep values finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.values[row * self.width + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.values[row * self.width..(row + 1) * self.width]
    }

    pub(crate) fn ensure_same_shape(&self, other: &Raster) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::ShapeMismatch {
                expected: self.shape(),
                actual: other.shape(),
            });
        }
        Ok(())
    }

    fn map(&self, f: impl Fn(f64) -> f64) -> Raster {
        Raster {
            height: self.height,
            width: self.width,
            pixel_spacing_mm: self.pixel_spacing_mm,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Target grid of a reconstruction: dimensions plus pixel spacing.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    pub height: usize,
    pub width: usize,
    pub pixel_spacing_mm: f64,
}

impl ImageGrid {
    pub fn square(size: usize, pixel_spacing_mm: f64) -> Self {
        Self {
            height: size,
            width: size,
            pixel_spacing_mm,
        }
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.height as f64 - 1.0) / 2.0,
            (self.width as f64 - 1.0) / 2.0,
        )
    }

    /// Physical length of the grid diagonal in millimetres.
    pub fn diagonal_mm(&self) -> f64 {
        (self.height as f64).hypot(self.width as f64) * self.pixel_spacing_mm
    }
}

macro_rules! raster_newtype {
    ($name:ident) => {
        #[derive(Debug, Clone, PartialEq)]
        pub struct $name(Raster);

        impl $name {
            pub fn new(
                height: usize,
                width: usize,
                pixel_spacing_mm: f64,
                values: Vec<f64>,
            ) -> Result<Self> {
                Raster::new(height, width, pixel_spacing_mm, values).map(Self)
            }

            pub fn filled(
                height: usize,
                width: usize,
                pixel_spacing_mm: f64,
                value: f64,
            ) -> Result<Self> {
                Raster::filled(height, width, pixel_spacing_mm, value).map(Self)
            }

            pub fn from_raster(raster: Raster) -> Self {
                Self(raster)
            }

            pub fn into_raster(self) -> Raster {
                self.0
            }
        }

        impl Deref for $name {
            type Target = Raster;

            fn deref(&self) -> &Raster {
                &self.0
            }
        }

        impl DerefMut for $name {
            fn deref_mut(&mut self) -> &mut Raster {
                &mut self.0
            }
        }
    };
}

raster_newtype!(Image);
raster_newtype!(AttenuationMap);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicsConstants {
    /// Linear attenuation of water in mm⁻¹.
    pub mu_water: f64,
}

impl PhysicsConstants {
    pub fn new(mu_water: f64) -> Result<Self> {
        if !(mu_water.is_finite() && mu_water > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mu_water must be positive, got {mu_water}"
            )));
        }
        Ok(Self { mu_water })
    }
}

impl Default for PhysicsConstants {
    /// Water at roughly 70 keV effective energy.
    fn default() -> Self {
        Self { mu_water: 0.0206 }
    }
}

/// Converts HU to linear attenuation, clamping HU below air to −1000 first.
pub fn hu_to_attenuation(img: &Image, constants: &PhysicsConstants) -> Result<AttenuationMap> {
    check_finite(img.values())?;
    let mu_w = constants.mu_water;
    Ok(AttenuationMap(
        img.map(|hu| mu_w * (1.0 + hu.max(AIR_HU) / 1000.0)),
    ))
}

pub fn attenuation_to_hu(map: &AttenuationMap, constants: &PhysicsConstants) -> Result<Image> {
    check_finite(map.values())?;
    let mu_w = constants.mu_water;
    Ok(Image(map.map(|mu| 1000.0 * (mu / mu_w - 1.0))))
}

/// Boolean pixel mask with the same layout as a [`Raster`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    height: usize,
    width: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(height: usize, width: usize, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "mask needs {} entries, got {}",
                height * width,
                bits.len()
            )));
        }
        Ok(Self {
            height,
            width,
            bits,
        })
    }

    pub fn full(height: usize, width: usize) -> Self {
        Self {
            height,
            width,
            bits: vec![true; height * width],
        }
    }

    /// Inscribed circle of the grid, centred on the grid centre.
    pub fn reconstruction_circle(height: usize, width: usize) -> Self {
        let rc = (height as f64 - 1.0) / 2.0;
        let cc = (width as f64 - 1.0) / 2.0;
        let radius = height.min(width) as f64 / 2.0;
        let r2 = radius * radius;
        let bits = (0..height)
            .flat_map(|r| {
                (0..width).map(move |c| {
                    let dr = r as f64 - rc;
                    let dc = c as f64 - cc;
                    dr * dr + dc * dc <= r2
                })
            })
            .collect();
        Self {
            height,
            width,
            bits,
        }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub(crate) fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::ShapeMismatch {
                expected: shape,
                actual: self.shape(),
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn image(values: Vec<f64>) -> Image {
        let n = values.len();
        Image::new(1, n, 1.0, values).unwrap()
    }

    #[test]
    fn water_air_and_bone_anchor_points() {
        let c = PhysicsConstants::default();
        let mu = hu_to_attenuation(&image(vec![0.0, -1000.0, 1000.0]), &c).unwrap();
        assert_eq!(mu.values(), &[c.mu_water, 0.0, 2.0 * c.mu_water]);

        let back = attenuation_to_hu(
            &AttenuationMap::new(1, 2, 1.0, vec![c.mu_water, 0.0]).unwrap(),
            &c,
        )
        .unwrap();
        assert_eq!(back.values(), &[0.0, -1000.0]);
    }

    #[test]
    fn below_air_is_clamped() {
        let c = PhysicsConstants::default();
        let mu = hu_to_attenuation(&image(vec![-1500.0]), &c).unwrap();
        assert_eq!(mu.values(), &[0.0]);
    }

    #[test]
    fn rejects_non_finite() {
        assert!(matches!(
            Image::new(1, 2, 1.0, vec![0.0, f64::NAN]),
            Err(Error::NonFinite { index: 1 })
        ));
        assert!(Image::new(0, 2, 1.0, vec![]).is_err());
        assert!(Image::new(1, 1, 0.0, vec![0.0]).is_err());
        assert!(PhysicsConstants::new(0.0).is_err());
    }

    #[test]
    fn circle_mask_is_inscribed() {
        let m = Mask::reconstruction_circle(64, 64);
        assert!(m.get(32, 32));
        assert!(!m.get(0, 0));
        assert!(!m.get(63, 0));
        let frac = m.count() as f64 / (64.0 * 64.0);
        assert!((frac - std::f64::consts::PI / 4.0).abs() < 0.02);
    }

    proptest! {
        #[test]
        fn hu_round_trip(values in proptest::collection::vec(-1000.0f64..3000.0, 1..64)) {
            let c = PhysicsConstants::default();
            let img = image(values.clone());
            let back = attenuation_to_hu(&hu_to_attenuation(&img, &c).unwrap(), &c).unwrap();
            for (a, b) in values.iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-9 * (1.0 + a.abs()));
            }
        }

        #[test]
        fn attenuation_round_trip(values in proptest::collection::vec(0.0f64..0.5, 1..64)) {
            let c = PhysicsConstants::default();
            let map = AttenuationMap::new(1, values.len(), 1.0, values.clone()).unwrap();
            let back = hu_to_attenuation(&attenuation_to_hu(&map, &c).unwrap(), &c).unwrap();
            for (a, b) in values.iter().zip(back.values()) {
                prop_assert!((a - b).abs() <= 1e-15 + 1e-12 * a.abs());
            }
        }
    }
}
