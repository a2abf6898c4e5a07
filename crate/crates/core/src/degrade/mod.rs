//! Physics-informed degradation operators, severity tables and mixtures.

mod blur;
mod metal;
mod mixture;
mod noise;
mod severity;
mod streak;

pub use blur::{apply_blur, gaussian_kernel};
pub use metal::{
    disk_mask, insert_metal, place_metal_disk, BoundingBox, MetalParams, BODY_SUPPORT_HU,
    DEFAULT_MU_METAL,
};
pub use mixture::{
    compose_mixture, degrade, sample_component_levels, ComponentParams, ComponentRecord,
    Degraded, MixtureConfig, MixtureRecord, SimulationSettings,
};
pub use noise::{apply_noise, NoiseConstants, NoiseDiagnostics, NoiseParams};
pub use severity::{
    severity_params, severity_params_by_name, DegradationKind, MixtureKind, Setting,
    SeverityLevel, SeverityParam, BLUR_SIGMAS, METAL_RADII_PX, NOISE_SCALES, SPARSE_VIEWS,
    STREAK_INCREMENTS,
};
pub use streak::{
    apply_streaks, make_streak_mask, StreakMask, StreakParams, StreakSegment, STREAK_SEGMENTS,
    STREAK_SEGMENT_BINS,
};

use crate::error::Result;
use crate::tomo::{radon, AttenuationMap, Geometry, Sinogram};

/// Sparse-view projection over every `(full / n_views)`-th angle of `geometry`.
/// Rows are bit-identical to the corresponding rows of the dense sinogram.
pub fn apply_aliasing(map: &AttenuationMap, geometry: &Geometry, n_views: usize) -> Result<Sinogram> {
    radon(map, &geometry.subsample(n_views)?)
}
