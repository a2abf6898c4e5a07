use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::blur::apply_blur;
use super::metal::{insert_metal, place_metal_disk, BoundingBox, MetalParams, DEFAULT_MU_METAL};
use super::noise::{apply_noise, NoiseConstants, NoiseParams};
use super::severity::{
    severity_params, DegradationKind, MixtureKind, SeverityLevel, SeverityParam,
};
use super::streak::{apply_streaks, make_streak_mask, StreakParams, StreakSegment};
use crate::error::{Error, Result};
use crate::seed::derive_seed;
use crate::tomo::{
    attenuation_to_hu, fbp, hu_to_attenuation, radon, Geometry, Image, PhysicsConstants,
};

/// Physical constants shared by every degradation pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimulationSettings {
    pub physics: PhysicsConstants,
    pub noise: NoiseConstants,
    /// Attenuation of inserted metal in mm⁻¹.
    pub mu_metal: f64,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            physics: PhysicsConstants::default(),
            noise: NoiseConstants::default(),
            mu_metal: DEFAULT_MU_METAL,
        }
    }
}

/// Operator parameters actually used for one component, as recorded in metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentParams {
    Noise {
        residual_scale: f64,
        incident_intensity: f64,
        dose_scale: f64,
        electronic_sigma: f64,
        log_floor: f64,
        clamped_negative_cells: usize,
        noise_seed: u64,
    },
    Blur {
        sigma_bins: f64,
    },
    Streak {
        delta_l: f64,
        segments: Vec<StreakSegment>,
        mask_seed: u64,
    },
    Aliasing {
        num_views: usize,
        full_views: usize,
    },
    Metal {
        radius_px: f64,
        center: (usize, usize),
        mu_metal: f64,
        placement_seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentRecord {
    pub kind: DegradationKind,
    pub level: SeverityLevel,
    pub params: ComponentParams,
}

/// What was applied to produce one degraded image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureRecord {
    pub components: Vec<ComponentRecord>,
    pub order: Vec<DegradationKind>,
    pub mixture_kind: Option<MixtureKind>,
    /// Maximum of the component levels.
    pub severity: SeverityLevel,
    pub metal_bbox: Option<BoundingBox>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub kind: MixtureKind,
    pub global_level: SeverityLevel,
    /// One level per component of `kind`, in application order.
    pub component_levels: Vec<SeverityLevel>,
    pub seed: u64,
}

impl MixtureConfig {
    /// Draws component levels around `global_level`.
    pub fn sample(kind: MixtureKind, global_level: SeverityLevel, seed: u64) -> Self {
        let k = kind.components().len();
        let component_levels =
            sample_component_levels(global_level, k, derive_seed(seed, "component-levels"));
        Self {
            kind,
            global_level,
            component_levels,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.component_levels.len() != self.kind.components().len() {
            return Err(Error::InvalidParameter(format!(
                "mixture {} has {} components but {} levels were given",
                self.kind.name(),
                self.kind.components().len(),
                self.component_levels.len()
            )));
        }
        Ok(())
    }

    pub fn components(&self) -> Vec<(DegradationKind, SeverityLevel)> {
        self.kind
            .components()
            .iter()
            .copied()
            .zip(self.component_levels.iter().copied())
            .collect()
    }
}

/// Each level drawn uniformly from `{global − 1, global}` (clipped at 0); if
/// no draw hits `global`, one randomly chosen component is raised to it so the
/// maximum always equals the global level.
pub fn sample_component_levels(global: SeverityLevel, k: usize, seed: u64) -> Vec<SeverityLevel> {
    if k == 0 {
        return Vec::new();
    }
    let g = global.get();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut levels: Vec<SeverityLevel> = (0..k)
        .map(|_| {
            let choices = [g.saturating_sub(1), g];
            SeverityLevel(*choices.choose(&mut rng).expect("non-empty"))
        })
        .collect();
    if !levels.contains(&global) {
        let i = rng.random_range(0..k);
        levels[i] = global;
    }
    levels
}

/// Output of a degradation pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Degraded {
    pub image: Image,
    pub record: MixtureRecord,
}

/// Runs the components on `reference` through the shared projection and
/// reconstruction path: optional metal insertion in the attenuation map,
/// dense or sparse forward projection, sinogram-domain operators in order,
/// then FBP back to HU.
///
/// Components must be listed in physical order (metal, aliasing, blur,
/// streak, noise) without repeats.
pub fn degrade(
    reference: &Image,
    components: &[(DegradationKind, SeverityLevel)],
    mixture_kind: Option<MixtureKind>,
    seed: u64,
    settings: &SimulationSettings,
) -> Result<Degraded> {
    if components.is_empty() {
        return Err(Error::Empty("degradation components"));
    }
    if components.windows(2).any(|w| w[0].0.stage() >= w[1].0.stage()) {
        return Err(Error::InvalidParameter(format!(
            "components {:?} are not in application order",
            components.iter().map(|c| c.0).collect::<Vec<_>>()
        )));
    }

    let physics = settings.physics;
    let mut map = hu_to_attenuation(reference, &physics)?;
    let dense = Geometry::full(reference.grid())?;
    let mut geometry = dense.clone();
    let mut records = Vec::with_capacity(components.len());
    let mut metal_bbox = None;

    // image-domain and projection-set stages
    for &(kind, level) in components {
        match (kind, severity_params(kind, level)) {
            (DegradationKind::Metal, SeverityParam::MetalRadius(radius)) => {
                let placement_seed = derive_seed(seed, "metal");
                let (mask, center) = place_metal_disk(reference, radius, placement_seed)?;
                let params = MetalParams::new(mask, settings.mu_metal, physics.mu_water)?;
                let (with_metal, bbox) = insert_metal(&map, &params)?;
                map = with_metal;
                metal_bbox = Some(bbox);
                records.push(ComponentRecord {
                    kind,
                    level,
                    params: ComponentParams::Metal {
                        radius_px: radius,
                        center,
                        mu_metal: settings.mu_metal,
                        placement_seed,
                    },
                });
            }
            (DegradationKind::Aliasing, SeverityParam::Views(n)) => {
                geometry = dense.subsample(n)?;
                records.push(ComponentRecord {
                    kind,
                    level,
                    params: ComponentParams::Aliasing {
                        num_views: n,
                        full_views: dense.num_views(),
                    },
                });
            }
            _ => {}
        }
    }

    let mut sinogram = radon(&map, &geometry)?;

    for &(kind, level) in components {
        match (kind, severity_params(kind, level)) {
            (DegradationKind::Blur, SeverityParam::BlurSigma(sigma)) => {
                sinogram = apply_blur(&sinogram, sigma)?;
                records.push(ComponentRecord {
                    kind,
                    level,
                    params: ComponentParams::Blur { sigma_bins: sigma },
                });
            }
            (DegradationKind::Streak, SeverityParam::StreakIncrement(delta_l)) => {
                let mask_seed = derive_seed(seed, "streak");
                let mask = make_streak_mask(sinogram.geometry(), level, mask_seed);
                let segments = mask.segments().to_vec();
                sinogram = apply_streaks(
                    &sinogram,
                    &StreakParams {
                        delta_l,
                        mask,
                        seed: mask_seed,
                    },
                )?;
                records.push(ComponentRecord {
                    kind,
                    level,
                    params: ComponentParams::Streak {
                        delta_l,
                        segments,
                        mask_seed,
                    },
                });
            }
            (DegradationKind::Noise, SeverityParam::NoiseScale(gamma)) => {
                let noise_seed = derive_seed(seed, "noise");
                let params = NoiseParams::new(settings.noise, gamma)?;
                let (noisy, diagnostics) = apply_noise(&sinogram, &params, noise_seed)?;
                sinogram = noisy;
                let c = settings.noise;
                records.push(ComponentRecord {
                    kind,
                    level,
                    params: ComponentParams::Noise {
                        residual_scale: gamma,
                        incident_intensity: c.incident_intensity,
                        dose_scale: c.dose_scale,
                        electronic_sigma: c.electronic_sigma,
                        log_floor: c.log_floor,
                        clamped_negative_cells: diagnostics.clamped_negative_cells,
                        noise_seed,
                    },
                });
            }
            _ => {}
        }
    }

    let image = attenuation_to_hu(&fbp(&sinogram)?, &physics)?;
    // records were pushed stage by stage, which is already application order
    let severity = components
        .iter()
        .map(|c| c.1)
        .max()
        .expect("non-empty components");
    Ok(Degraded {
        image,
        record: MixtureRecord {
            order: records.iter().map(|r| r.kind).collect(),
            components: records,
            mixture_kind,
            severity,
            metal_bbox,
            seed,
        },
    })
}

/// Applies a mixture scenario to a reference slice.
pub fn compose_mixture(
    reference: &Image,
    config: &MixtureConfig,
    settings: &SimulationSettings,
) -> Result<Degraded> {
    config.validate()?;
    degrade(
        reference,
        &config.components(),
        Some(config.kind),
        config.seed,
        settings,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phantom::make_phantom;

    #[test]
    fn levels_at_floor_are_zero() {
        for seed in 0..50 {
            assert_eq!(
                sample_component_levels(SeverityLevel::L0, 3, seed),
                vec![SeverityLevel::L0; 3]
            );
        }
    }

    #[test]
    fn max_level_always_equals_global() {
        for seed in 0..500 {
            let l = sample_component_levels(SeverityLevel::L3, 2, seed);
            assert_eq!(l.iter().max(), Some(&SeverityLevel::L3));
        }
    }

    #[test]
    fn levels_stay_in_neighbourhood() {
        // sampling oracle over 10⁴ seeds
        let mut seen = [0usize; 4];
        for seed in 0..10_000 {
            for l in sample_component_levels(SeverityLevel::L2, 3, seed) {
                seen[l.index()] += 1;
            }
        }
        assert_eq!(seen[0], 0);
        assert_eq!(seen[3], 0);
        assert!(seen[1] > 0 && seen[2] > seen[1]);
    }

    #[test]
    fn mixture_config_validation() {
        let cfg = MixtureConfig {
            kind: MixtureKind::MetalBlurNoise,
            global_level: SeverityLevel::L1,
            component_levels: vec![SeverityLevel::L1],
            seed: 0,
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn rejects_out_of_order_components() {
        let img = make_phantom(64, 1).unwrap();
        let err = degrade(
            &img,
            &[
                (DegradationKind::Noise, SeverityLevel::L0),
                (DegradationKind::Blur, SeverityLevel::L0),
            ],
            None,
            0,
            &SimulationSettings::default(),
        );
        assert!(err.is_err());
        assert!(degrade(&img, &[], None, 0, &SimulationSettings::default()).is_err());
    }

    #[test]
    fn single_component_matches_direct_pipeline() {
        let img = make_phantom(64, 3).unwrap();
        let settings = SimulationSettings::default();
        let seed = 77;
        let got = degrade(
            &img,
            &[(DegradationKind::Noise, SeverityLevel::L2)],
            None,
            seed,
            &settings,
        )
        .unwrap();

        let map = hu_to_attenuation(&img, &settings.physics).unwrap();
        let g = Geometry::full(img.grid()).unwrap();
        let s = radon(&map, &g).unwrap();
        let p = NoiseParams::new(settings.noise, 2.5).unwrap();
        let (noisy, _) = apply_noise(&s, &p, derive_seed(seed, "noise")).unwrap();
        let direct = attenuation_to_hu(&fbp(&noisy).unwrap(), &settings.physics).unwrap();
        assert_eq!(got.image, direct);
        assert_eq!(got.record.order, vec![DegradationKind::Noise]);
        assert_eq!(got.record.severity, SeverityLevel::L2);
        assert!(got.record.metal_bbox.is_none());
    }

    #[test]
    fn metal_blur_noise_record() {
        let img = make_phantom(64, 4).unwrap();
        let cfg = MixtureConfig {
            kind: MixtureKind::MetalBlurNoise,
            global_level: SeverityLevel::L3,
            component_levels: vec![SeverityLevel::L1, SeverityLevel::L3, SeverityLevel::L2],
            seed: 5,
        };
        let out = compose_mixture(&img, &cfg, &SimulationSettings::default()).unwrap();
        use DegradationKind::*;
        assert_eq!(out.record.order, vec![Metal, Blur, Noise]);
        assert_eq!(out.record.severity, SeverityLevel::L3);
        assert_eq!(out.record.mixture_kind, Some(MixtureKind::MetalBlurNoise));
        let bbox = out.record.metal_bbox.unwrap();
        assert_eq!(bbox.row_max - bbox.row_min, 16);
        let again = compose_mixture(&img, &cfg, &SimulationSettings::default()).unwrap();
        assert_eq!(out, again);
    }

    #[test]
    fn severity_is_max_of_components() {
        let img = make_phantom(64, 2).unwrap();
        let out = degrade(
            &img,
            &[
                (DegradationKind::Streak, SeverityLevel::L3),
                (DegradationKind::Noise, SeverityLevel::L1),
            ],
            Some(MixtureKind::StreakNoise),
            9,
            &SimulationSettings::default(),
        )
        .unwrap();
        assert_eq!(out.record.severity, SeverityLevel::L3);
    }

    #[test]
    fn record_json_round_trip() {
        let img = make_phantom(64, 6).unwrap();
        let out = compose_mixture(
            &img,
            &MixtureConfig::sample(MixtureKind::MetalBlurNoise, SeverityLevel::L2, 3),
            &SimulationSettings::default(),
        )
        .unwrap();
        let json = serde_json::to_string(&out.record).unwrap();
        let back: MixtureRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out.record);
    }
}
