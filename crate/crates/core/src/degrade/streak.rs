use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::severity::SeverityLevel;
use crate::error::{Error, Result};
use crate::tomo::{Geometry, Sinogram};

pub const STREAK_SEGMENTS: usize = 6;
pub const STREAK_SEGMENT_BINS: usize = 3;

/// One corrupted run of detector bins on a single view.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StreakSegment {
    pub view: usize,
    pub first_detector: usize,
    pub bins: usize,
}

/// Binary sinogram-shaped mask with the segments that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct StreakMask {
    shape: (usize, usize),
    bits: Vec<bool>,
    segments: Vec<StreakSegment>,
}

impl StreakMask {
    pub fn from_bits(shape: (usize, usize), bits: Vec<bool>) -> Result<Self> {
        if bits.len() != shape.0 * shape.1 {
            return Err(Error::InvalidParameter(format!(
                "streak mask of shape {shape:?} needs {} entries, got {}",
                shape.0 * shape.1,
                bits.len()
            )));
        }
        Ok(Self {
            shape,
            bits,
            segments: Vec::new(),
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.shape
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn segments(&self) -> &[StreakSegment] {
        &self.segments
    }

    pub fn popcount(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreakParams {
    /// Line-integral increment added on masked cells.
    pub delta_l: f64,
    pub mask: StreakMask,
    pub seed: u64,
}

/// Random streak mask: [`STREAK_SEGMENTS`] runs of [`STREAK_SEGMENT_BINS`]
/// adjacent detector bins, each on one randomly drawn view. The level does
/// not change the mask; severity enters through the increment only.
pub fn make_streak_mask(geometry: &Geometry, _level: SeverityLevel, seed: u64) -> StreakMask {
    let (views, detectors) = geometry.shape();
    let bins = STREAK_SEGMENT_BINS.min(detectors);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut bits = vec![false; views * detectors];
    let segments: Vec<StreakSegment> = (0..STREAK_SEGMENTS)
        .map(|_| {
            let view = rng.random_range(0..views);
            let first_detector = rng.random_range(0..=detectors - bins);
            StreakSegment {
                view,
                first_detector,
                bins,
            }
        })
        .collect();
    for seg in &segments {
        let base = seg.view * detectors + seg.first_detector;
        bits[base..base + seg.bins].iter_mut().for_each(|b| *b = true);
    }
    StreakMask {
        shape: (views, detectors),
        bits,
        segments,
    }
}

/// `s + ΔL·M`.
pub fn apply_streaks(sinogram: &Sinogram, params: &StreakParams) -> Result<Sinogram> {
    if params.mask.shape() != sinogram.shape() {
        return Err(Error::ShapeMismatch {
            expected: sinogram.shape(),
            actual: params.mask.shape(),
        });
    }
    if !params.delta_l.is_finite() {
        return Err(Error::InvalidParameter("streak increment must be finite".into()));
    }
    let values = sinogram
        .values()
        .iter()
        .zip(params.mask.bits())
        .map(|(&s, &m)| if m { s + params.delta_l } else { s })
        .collect();
    Ok(sinogram.with_values(values))
}
