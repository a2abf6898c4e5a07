use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::degrade::{Setting, SeverityLevel, SimulationSettings};
use crate::error::{Error, Result};
use crate::phantom::MIN_PHANTOM_SIZE;

pub const DEFAULT_IMAGE_SIZE: usize = 512;
pub const DEFAULT_TEST_FRACTION: f64 = 0.3;

fn default_image_size() -> usize {
    DEFAULT_IMAGE_SIZE
}

fn default_settings() -> Vec<Setting> {
    Setting::ALL.to_vec()
}

fn default_levels() -> Vec<SeverityLevel> {
    SeverityLevel::ALL.to_vec()
}

fn default_test_fraction() -> f64 {
    DEFAULT_TEST_FRACTION
}

fn default_true() -> bool {
    true
}

/// What to generate. Only `num_reference_slices` is required in JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub num_reference_slices: usize,
    #[serde(default = "default_image_size")]
    pub image_size: usize,
    #[serde(default = "default_settings")]
    pub settings: Vec<Setting>,
    #[serde(default = "default_levels")]
    pub levels: Vec<SeverityLevel>,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Fraction of reference slices held out for testing.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
    #[serde(default)]
    pub simulation: SimulationSettings,
    /// Store the spectral descriptor of each degraded image in its metadata.
    #[serde(default = "default_true")]
    pub spectral_descriptor: bool,
}

impl GenerationConfig {
    pub fn new(num_reference_slices: usize) -> Self {
        Self {
            num_reference_slices,
            image_size: DEFAULT_IMAGE_SIZE,
            settings: default_settings(),
            levels: default_levels(),
            master_seed: 0,
            output_dir: None,
            test_fraction: DEFAULT_TEST_FRACTION,
            simulation: SimulationSettings::default(),
            spectral_descriptor: true,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |m: String| Err(Error::InvalidParameter(m));
        if self.num_reference_slices == 0 {
            return invalid("num_reference_slices must be at least 1".into());
        }
        if self.image_size < MIN_PHANTOM_SIZE {
            return invalid(format!(
                "image_size must be at least {MIN_PHANTOM_SIZE}, got {}",
                self.image_size
            ));
        }
        if self.settings.is_empty() || self.levels.is_empty() {
            return invalid("at least one setting and one level are required".into());
        }
        if self.settings.iter().collect::<BTreeSet<_>>().len() != self.settings.len() {
            return invalid("settings contain duplicates".into());
        }
        if self.levels.iter().collect::<BTreeSet<_>>().len() != self.levels.len() {
            return invalid("levels contain duplicates".into());
        }
        if !(0.0..1.0).contains(&self.test_fraction) {
            return invalid(format!("test_fraction {} not in [0, 1)", self.test_fraction));
        }
        let s = &self.simulation;
        if !(s.mu_metal.is_finite() && s.mu_metal > s.physics.mu_water) {
            return invalid(format!("mu_metal {} must exceed water attenuation", s.mu_metal));
        }
        crate::degrade::NoiseParams::new(s.noise, 1.0)?;
        crate::tomo::PhysicsConstants::new(s.physics.mu_water)?;
        Ok(())
    }

    /// Degraded samples per reference slice.
    pub fn samples_per_reference(&self) -> usize {
        self.settings.len() * self.levels.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = GenerationConfig::from_json(r#"{"num_reference_slices": 3}"#).unwrap();
        assert_eq!(cfg.image_size, 512);
        assert_eq!(cfg.samples_per_reference(), 40);
        assert_eq!(cfg.test_fraction, 0.3);
        assert_eq!(cfg, GenerationConfig { num_reference_slices: 3, ..GenerationConfig::new(3) });
    }

    #[test]
    fn settings_by_name() {
        let cfg = GenerationConfig::from_json(
            r#"{"num_reference_slices": 1, "settings": ["S1_noise", "M5"], "levels": [0, 3]}"#,
        )
        .unwrap();
        assert_eq!(cfg.settings[1].name(), "M5_m+b+n");
        assert_eq!(cfg.levels, [SeverityLevel::L0, SeverityLevel::L3]);
    }

    #[test]
    fn rejects_bad_configs() {
        for text in [
            r#"{}"#,
            r#"{"num_reference_slices": 0}"#,
            r#"{"num_reference_slices": 1, "image_size": 32}"#,
            r#"{"num_reference_slices": 1, "settings": []}"#,
            r#"{"num_reference_slices": 1, "levels": [4]}"#,
            r#"{"num_reference_slices": 1, "levels": [1, 1]}"#,
            r#"{"num_reference_slices": 1, "settings": ["S9"]}"#,
            r#"{"num_reference_slices": 1, "test_fraction": 1.0}"#,
            r#"{"num_reference_slices": 1, "colour": "red"}"#,
        ] {
            assert!(GenerationConfig::from_json(text).is_err(), "{text}");
        }
    }
}
