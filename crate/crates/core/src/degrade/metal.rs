use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomo::{AttenuationMap, Image, Mask};

/// Titanium-like attenuation, about ten times water.
pub const DEFAULT_MU_METAL: f64 = 0.2;

/// Pixels above this HU count as body support when placing metal.
pub const BODY_SUPPORT_HU: f64 = -500.0;

/// Inclusive pixel bounding box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub row_min: usize,
    pub col_min: usize,
    pub row_max: usize,
    pub col_max: usize,
}

impl BoundingBox {
    /// Tight box around the set pixels, `None` for an empty mask.
    pub fn of_mask(mask: &Mask) -> Option<Self> {
        let (_, w) = mask.shape();
        let mut bbox: Option<Self> = None;
        for (i, _) in mask.bits().iter().enumerate().filter(|(_, &b)| b) {
            let (r, c) = (i / w, i % w);
            bbox = Some(match bbox {
                None => Self {
                    row_min: r,
                    col_min: c,
                    row_max: r,
                    col_max: c,
                },
                Some(b) => Self {
                    row_min: b.row_min.min(r),
                    col_min: b.col_min.min(c),
                    row_max: b.row_max.max(r),
                    col_max: b.col_max.max(c),
                },
            });
        }
        bbox
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetalParams {
    mask: Mask,
    mu_metal: f64,
    bbox: BoundingBox,
}

impl MetalParams {
    pub fn new(mask: Mask, mu_metal: f64, mu_water: f64) -> Result<Self> {
        if !(mu_metal.is_finite() && mu_metal > mu_water) {
            return Err(Error::InvalidParameter(format!(
                "metal attenuation {mu_metal} must exceed water ({mu_water})"
            )));
        }
        let bbox = BoundingBox::of_mask(&mask)
            .ok_or_else(|| Error::InvalidParameter("metal mask is empty".into()))?;
        Ok(Self {
            mask,
            mu_metal,
            bbox,
        })
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn mu_metal(&self) -> f64 {
        self.mu_metal
    }

    pub fn bbox(&self) -> BoundingBox {
        self.bbox
    }
}

pub fn disk_mask(height: usize, width: usize, center: (usize, usize), radius: f64) -> Mask {
    let r2 = radius * radius;
    let bits = (0..height * width)
        .map(|i| {
            let dr = (i / width) as f64 - center.0 as f64;
            let dc = (i % width) as f64 - center.1 as f64;
            dr * dr + dc * dc <= r2
        })
        .collect();
    Mask::new(height, width, bits).expect("sized to the grid")
}

/// Picks a disk centre uniformly among body-support pixels of the reference.
pub fn place_metal_disk(reference: &Image, radius: f64, seed: u64) -> Result<(Mask, (usize, usize))> {
    let w = reference.width();
    let support: Vec<usize> = reference
        .values()
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > BODY_SUPPORT_HU)
        .map(|(i, _)| i)
        .collect();
    if support.is_empty() {
        return Err(Error::Degenerate(
            "no body support pixels to place metal in".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = support[rng.random_range(0..support.len())];
    let center = (idx / w, idx % w);
    Ok((
        disk_mask(reference.height(), w, center, radius),
        center,
    ))
}

/// `μ' = (1 − m)·μ + m·μ_metal`.
pub fn insert_metal(map: &AttenuationMap, params: &MetalParams) -> Result<(AttenuationMap, BoundingBox)> {
    params.mask.ensure_shape(map.shape())?;
    let mut out = map.clone();
    for (v, &m) in out.values_mut().iter_mut().zip(params.mask.bits()) {
        if m {
            *v = params.mu_metal;
        }
    }
    Ok((out, params.bbox))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn disk_bbox_matches_scan() {
        let mask = disk_mask(256, 256, (100, 120), 8.0);
        // mask-scan oracle
        let (mut r0, mut c0, mut r1, mut c1) = (usize::MAX, usize::MAX, 0, 0);
        for r in 0..256 {
            for c in 0..256 {
                if mask.get(r, c) {
                    r0 = r0.min(r);
                    c0 = c0.min(c);
                    r1 = r1.max(r);
                    c1 = c1.max(c);
                }
            }
        }
        let b = BoundingBox::of_mask(&mask).unwrap();
        assert_eq!((b.row_min, b.col_min, b.row_max, b.col_max), (r0, c0, r1, c1));
        assert_eq!((r0, c0, r1, c1), (92, 112, 108, 128));
    }

    #[test]
    fn masked_pixels_take_metal_value() {
        let map = AttenuationMap::filled(32, 32, 1.0, 0.02).unwrap();
        let mask = disk_mask(32, 32, (10, 12), 3.0);
        let p = MetalParams::new(mask.clone(), 0.2, 0.0206).unwrap();
        let (out, bbox) = insert_metal(&map, &p).unwrap();
        for (i, &m) in mask.bits().iter().enumerate() {
            assert_eq!(out.values()[i], if m { 0.2 } else { 0.02 });
        }
        assert_eq!(bbox.row_min, 7);
        assert_eq!(bbox.col_max, 15);
    }

    #[test]
    fn empty_mask_and_weak_metal_rejected() {
        let empty = Mask::new(4, 4, vec![false; 16]).unwrap();
        assert!(MetalParams::new(empty, 0.2, 0.0206).is_err());
        let mask = disk_mask(8, 8, (4, 4), 1.0);
        assert!(MetalParams::new(mask, 0.01, 0.0206).is_err());
    }

    #[test]
    fn mismatched_mask_rejected() {
        let map = AttenuationMap::filled(8, 8, 1.0, 0.02).unwrap();
        let p = MetalParams::new(disk_mask(16, 16, (4, 4), 2.0), 0.2, 0.0206).unwrap();
        assert!(insert_metal(&map, &p).is_err());
    }

    #[test]
    fn placement_lands_in_support() {
        let mut values = vec![-1000.0; 64 * 64];
        for r in 20..40 {
            for c in 10..30 {
                values[r * 64 + c] = 40.0;
            }
        }
        let img = Image::new(64, 64, 1.0, values).unwrap();
        for seed in 0..20 {
            let (_, (r, c)) = place_metal_disk(&img, 4.0, seed).unwrap();
            assert!((20..40).contains(&r) && (10..30).contains(&c));
        }
        let air = Image::filled(8, 8, 1.0, -1000.0).unwrap();
        assert!(place_metal_disk(&air, 2.0, 0).is_err());
    }
}
