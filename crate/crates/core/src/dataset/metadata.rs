use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::degrade::{
    severity_params, BoundingBox, ComponentParams, ComponentRecord, DegradationKind,
    MixtureKind, MixtureRecord, Setting, SeverityLevel, SeverityParam,
};
use crate::error::{Error, Result};
use crate::spectral::SpectralDescriptor;

/// JSON Schema (draft 2020-12) for per-sample metadata files.
pub const METADATA_SCHEMA: &str = include_str!("../../schema/metadata.schema.json");

pub const GENERATOR_VERSION: &str = concat!("ctdb/", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

/// Per-sample metadata written next to every degraded image. Paths are
/// relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleMetadata {
    pub sample_id: String,
    pub reference_id: String,
    pub slice: usize,
    pub setting: Setting,
    pub split: Split,
    pub reference_path: String,
    pub degraded_path: String,
    pub components: Vec<ComponentRecord>,
    pub order: Vec<DegradationKind>,
    pub mixture_kind: Option<MixtureKind>,
    pub severity: SeverityLevel,
    pub metal_bbox: Option<BoundingBox>,
    pub seed: u64,
    pub generator_version: String,
    pub prompt: String,
    /// Base64 of the 17 little-endian f32 descriptor values.
    pub spectral_descriptor: Option<String>,
}

const REQUIRED_KEYS: [&str; 16] = [
    "sample_id",
    "reference_id",
    "slice",
    "setting",
    "split",
    "reference_path",
    "degraded_path",
    "components",
    "order",
    "mixture_kind",
    "severity",
    "metal_bbox",
    "seed",
    "generator_version",
    "prompt",
    "spectral_descriptor",
];

fn adjective(level: SeverityLevel) -> &'static str {
    ["mild", "moderate", "strong", "severe"][level.index()]
}

fn phrase(kind: DegradationKind) -> &'static str {
    match kind {
        DegradationKind::Noise => "noise and grainy appearance",
        DegradationKind::Blur => "blur and loss of sharpness",
        DegradationKind::Streak => "streak artifacts",
        DegradationKind::Aliasing => "sparse-view aliasing artifacts",
        DegradationKind::Metal => "metal artifacts causing bright streaks",
    }
}

/// Natural-language description of the applied degradations, one phrase
/// per component in application order.
pub fn describe(record: &MixtureRecord) -> String {
    let parts: Vec<String> = record
        .components
        .iter()
        .map(|c| format!("{} {}", adjective(c.level), phrase(c.kind)))
        .collect();
    let joined = match parts.as_slice() {
        [] => "no degradation".to_string(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {last}", init.join(", ")),
    };
    format!(
        "Abdominal CT slice with {joined} (overall severity {}).",
        record.severity
    )
}

impl SampleMetadata {
    pub fn record(&self) -> MixtureRecord {
        MixtureRecord {
            components: self.components.clone(),
            order: self.order.clone(),
            mixture_kind: self.mixture_kind,
            severity: self.severity,
            metal_bbox: self.metal_bbox,
            seed: self.seed,
        }
    }

    /// Consistency rules beyond the JSON shape.
    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Format {
            format: "metadata",
            reason: format!("{}: {m}", self.sample_id),
        });
        if self.sample_id.is_empty() || self.reference_id.is_empty() {
            return bad("empty identifier".into());
        }
        if self.components.is_empty() {
            return bad("no components".into());
        }
        let kinds: Vec<DegradationKind> = self.components.iter().map(|c| c.kind).collect();
        if kinds != self.order {
            return bad(format!("order {:?} differs from components {kinds:?}", self.order));
        }
        if kinds.windows(2).any(|w| w[0].stage() >= w[1].stage()) {
            return bad("components out of application order".into());
        }
        let max = self.components.iter().map(|c| c.level).max().expect("non-empty");
        if self.severity != max {
            return bad(format!("severity {} is not the component maximum {max}", self.severity));
        }
        if self.setting.components() != kinds || self.setting.mixture_kind() != self.mixture_kind {
            return bad(format!("components do not match setting {}", self.setting));
        }
        for c in &self.components {
            let ok = match (&c.params, severity_params(c.kind, c.level)) {
                (ComponentParams::Noise { residual_scale, .. }, SeverityParam::NoiseScale(g)) => {
                    *residual_scale == g
                }
                (ComponentParams::Blur { sigma_bins }, SeverityParam::BlurSigma(s)) => *sigma_bins == s,
                (ComponentParams::Streak { delta_l, .. }, SeverityParam::StreakIncrement(d)) => {
                    *delta_l == d
                }
                (ComponentParams::Aliasing { num_views, .. }, SeverityParam::Views(n)) => *num_views == n,
                (ComponentParams::Metal { radius_px, .. }, SeverityParam::MetalRadius(r)) => *radius_px == r,
                _ => false,
            };
            if !ok {
                return bad(format!("{} parameters do not match level {}", c.kind, c.level));
            }
        }
        let has_metal = kinds.contains(&DegradationKind::Metal);
        match self.metal_bbox {
            Some(b) if !has_metal => return bad(format!("metal_bbox {b:?} without metal")),
            None if has_metal => return bad("metal component without metal_bbox".into()),
            Some(b) if b.row_min > b.row_max || b.col_min > b.col_max => {
                return bad(format!("inverted metal_bbox {b:?}"))
            }
            _ => {}
        }
        if let Some(d) = &self.spectral_descriptor {
            SpectralDescriptor::from_base64(d)?;
        }
        Ok(())
    }
}

/// Same object keys at every depth and same array lengths; scalar values
/// are not compared.
fn same_shape(a: &Value, b: &Value, path: &str) -> std::result::Result<(), String> {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for k in x.keys() {
                if !y.contains_key(k) {
                    return Err(format!("unexpected key {path}/{k}"));
                }
            }
            for (k, v) in y {
                let sub = format!("{path}/{k}");
                match x.get(k) {
                    Some(u) => same_shape(u, v, &sub)?,
                    None => return Err(format!("missing key {sub}")),
                }
            }
            Ok(())
        }
        (Value::Array(x), Value::Array(y)) if x.len() == y.len() => x
            .iter()
            .zip(y)
            .enumerate()
            .try_for_each(|(i, (u, v))| same_shape(u, v, &format!("{path}/{i}"))),
        (Value::Null, Value::Null) => Ok(()),
        (Value::Null, _) | (_, Value::Null) => Err(format!("null mismatch at {path}")),
        (Value::Array(_), _) | (_, Value::Array(_)) | (Value::Object(_), _) | (_, Value::Object(_)) => {
            Err(format!("type mismatch at {path}"))
        }
        _ => Ok(()),
    }
}

/// Strict validation of one metadata document: every schema key present,
/// no extra keys at any depth, typed fields in range, plus [`SampleMetadata::check`].
pub fn validate_metadata(value: &Value) -> Result<SampleMetadata> {
    let fail = |reason: String| Error::Format {
        format: "metadata",
        reason,
    };
    let obj = value
        .as_object()
        .ok_or_else(|| fail("document is not an object".into()))?;
    for key in REQUIRED_KEYS {
        if !obj.contains_key(key) {
            return Err(fail(format!("missing key '{key}'")));
        }
    }
    let meta: SampleMetadata = serde_json::from_value(value.clone())?;
    same_shape(value, &serde_json::to_value(&meta)?, "").map_err(fail)?;
    meta.check()?;
    Ok(meta)
}

pub fn validate_metadata_str(text: &str) -> Result<SampleMetadata> {
    validate_metadata(&serde_json::from_str(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise_meta() -> SampleMetadata {
        SampleMetadata {
            sample_id: "S1_noise_L2_0000".into(),
            reference_id: "slice_0000".into(),
            slice: 0,
            setting: "S1".parse().unwrap(),
            split: Split::Train,
            reference_path: "refs/slice_0000.ctdi".into(),
            degraded_path: "degraded/S1_noise/L2/slice_0000.ctdi".into(),
            components: vec![ComponentRecord {
                kind: DegradationKind::Noise,
                level: SeverityLevel::L2,
                params: ComponentParams::Noise {
                    residual_scale: 2.5,
                    incident_intensity: 2e5,
                    dose_scale: 1.0,
                    electronic_sigma: 10.0,
                    log_floor: 0.1,
                    clamped_negative_cells: 0,
                    noise_seed: 5,
                },
            }],
            order: vec![DegradationKind::Noise],
            mixture_kind: None,
            severity: SeverityLevel::L2,
            metal_bbox: None,
            seed: 42,
            generator_version: GENERATOR_VERSION.into(),
            prompt: "x".into(),
            spectral_descriptor: None,
        }
    }

    #[test]
    fn schema_is_valid_json_listing_every_key() {
        let schema: Value = serde_json::from_str(METADATA_SCHEMA).unwrap();
        let required: Vec<&str> = schema["required"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap())
            .collect();
        assert_eq!(required, REQUIRED_KEYS);
        let props = schema["properties"].as_object().unwrap();
        assert_eq!(props.len(), REQUIRED_KEYS.len());
        assert_eq!(schema["additionalProperties"], Value::Bool(false));
    }

    #[test]
    fn valid_document_passes() {
        let v = serde_json::to_value(noise_meta()).unwrap();
        assert_eq!(validate_metadata(&v).unwrap(), noise_meta());
    }

    #[test]
    fn shape_violations_rejected() {
        let base = serde_json::to_value(noise_meta()).unwrap();
        let mut extra = base.clone();
        extra["colour"] = Value::from("red");
        assert!(validate_metadata(&extra).is_err());
        let mut missing = base.clone();
        missing.as_object_mut().unwrap().remove("metal_bbox");
        assert!(validate_metadata(&missing).is_err());
        let mut nested = base.clone();
        nested["components"][0]["params"]["bogus"] = Value::from(1);
        assert!(validate_metadata(&nested).is_err());
        let mut level = base;
        level["severity"] = Value::from(9);
        assert!(validate_metadata(&level).is_err());
    }

    #[test]
    fn consistency_violations_rejected() {
        let mut m = noise_meta();
        m.severity = SeverityLevel::L3;
        assert!(m.check().is_err());
        let mut m = noise_meta();
        m.components[0].params = ComponentParams::Blur { sigma_bins: 1.5 };
        assert!(m.check().is_err());
        let mut m = noise_meta();
        m.metal_bbox = Some(BoundingBox { row_min: 0, col_min: 0, row_max: 1, col_max: 1 });
        assert!(m.check().is_err());
        let mut m = noise_meta();
        m.setting = "S2".parse().unwrap();
        assert!(m.check().is_err());
        let mut m = noise_meta();
        m.spectral_descriptor = Some("AAAA".into());
        assert!(m.check().is_err());
    }

    #[test]
    fn prompts_follow_components() {
        let mut m = noise_meta();
        assert_eq!(
            describe(&m.record()),
            "Abdominal CT slice with strong noise and grainy appearance (overall severity L2)."
        );
        m.components.insert(
            0,
            ComponentRecord {
                kind: DegradationKind::Blur,
                level: SeverityLevel::L1,
                params: ComponentParams::Blur { sigma_bins: 1.0 },
            },
        );
        assert!(describe(&m.record()).contains("moderate blur and loss of sharpness and strong noise"));
    }
}
