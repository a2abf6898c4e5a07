use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordinal severity, L0 (mildest) to L3 (strongest).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct SeverityLevel(pub(crate) u8);

impl SeverityLevel {
    pub const L0: Self = Self(0);
    pub const L1: Self = Self(1);
    pub const L2: Self = Self(2);
    pub const L3: Self = Self(3);
    pub const ALL: [Self; 4] = [Self::L0, Self::L1, Self::L2, Self::L3];

    pub fn new(level: u8) -> Result<Self> {
        if level > 3 {
            return Err(Error::InvalidParameter(format!(
                "severity level must be in 0..=3, got {level}"
            )));
        }
        Ok(Self(level))
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TryFrom<u8> for SeverityLevel {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        Self::new(v)
    }
}

impl From<SeverityLevel> for u8 {
    fn from(l: SeverityLevel) -> u8 {
        l.0
    }
}

impl fmt::Display for SeverityLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "L{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradationKind {
    Noise,
    Blur,
    Streak,
    Aliasing,
    Metal,
}

impl DegradationKind {
    pub const ALL: [Self; 5] = [
        Self::Noise,
        Self::Blur,
        Self::Streak,
        Self::Aliasing,
        Self::Metal,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Noise => "noise",
            Self::Blur => "blur",
            Self::Streak => "streak",
            Self::Aliasing => "aliasing",
            Self::Metal => "metal",
        }
    }

    /// Position in the physical application order: image-domain insertion,
    /// then projection, then detector response, outliers and photon noise.
    pub(crate) fn stage(self) -> u8 {
        match self {
            Self::Metal => 0,
            Self::Aliasing => 1,
            Self::Blur => 2,
            Self::Streak => 3,
            Self::Noise => 4,
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName(format!("degradation kind '{s}'")))
    }
}

/// The five mixture scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MixtureKind {
    #[serde(rename = "b+n")]
    BlurNoise,
    #[serde(rename = "s+n")]
    StreakNoise,
    #[serde(rename = "m+n")]
    MetalNoise,
    #[serde(rename = "a+n")]
    AliasingNoise,
    #[serde(rename = "m+b+n")]
    MetalBlurNoise,
}

impl MixtureKind {
    pub const ALL: [Self; 5] = [
        Self::BlurNoise,
        Self::StreakNoise,
        Self::MetalNoise,
        Self::AliasingNoise,
        Self::MetalBlurNoise,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::BlurNoise => "b+n",
            Self::StreakNoise => "s+n",
            Self::MetalNoise => "m+n",
            Self::AliasingNoise => "a+n",
            Self::MetalBlurNoise => "m+b+n",
        }
    }

    /// Components in application order.
    pub fn components(self) -> &'static [DegradationKind] {
        use DegradationKind::*;
        match self {
            Self::BlurNoise => &[Blur, Noise],
            Self::StreakNoise => &[Streak, Noise],
            Self::MetalNoise => &[Metal, Noise],
            Self::AliasingNoise => &[Aliasing, Noise],
            Self::MetalBlurNoise => &[Metal, Blur, Noise],
        }
    }
}

impl FromStr for MixtureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownName(format!("mixture kind '{s}'")))
    }
}

/// Benchmark settings: five single degradations and five mixtures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Setting {
    Single(DegradationKind),
    Mixture(MixtureKind),
}

impl Setting {
    pub const ALL: [Self; 10] = [
        Self::Single(DegradationKind::Noise),
        Self::Single(DegradationKind::Blur),
        Self::Single(DegradationKind::Streak),
        Self::Single(DegradationKind::Aliasing),
        Self::Single(DegradationKind::Metal),
        Self::Mixture(MixtureKind::BlurNoise),
        Self::Mixture(MixtureKind::StreakNoise),
        Self::Mixture(MixtureKind::MetalNoise),
        Self::Mixture(MixtureKind::AliasingNoise),
        Self::Mixture(MixtureKind::MetalBlurNoise),
    ];

    pub fn name(self) -> String {
        let idx = Self::ALL.iter().position(|s| *s == self).expect("listed") % 5 + 1;
        match self {
            Self::Single(k) => format!("S{idx}_{}", k.name()),
            Self::Mixture(m) => format!("M{idx}_{}", m.name()),
        }
    }

    pub fn components(self) -> Vec<DegradationKind> {
        match self {
            Self::Single(k) => vec![k],
            Self::Mixture(m) => m.components().to_vec(),
        }
    }

    pub fn mixture_kind(self) -> Option<MixtureKind> {
        match self {
            Self::Single(_) => None,
            Self::Mixture(m) => Some(m),
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Setting {
    type Err = Error;

    /// Accepts the full name (`S3_streak`, `M5_m+b+n`) or the short code (`S3`, `M5`).
    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|st| {
                let name = st.name();
                name == s || name.split('_').next() == Some(s)
            })
            .ok_or_else(|| Error::UnknownName(format!("setting '{s}'")))
    }
}

impl TryFrom<String> for Setting {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Setting> for String {
    fn from(s: Setting) -> String {
        s.name()
    }
}

/// Per-level operator parameter of a degradation family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeverityParam {
    /// Residual noise scale γ.
    NoiseScale(f64),
    /// Detector-axis Gaussian σ in bins.
    BlurSigma(f64),
    /// Line-integral increment ΔL on masked sinogram cells.
    StreakIncrement(f64),
    /// Number of retained views.
    Views(usize),
    /// Metal disk radius in pixels.
    MetalRadius(f64),
}

pub const NOISE_SCALES: [f64; 4] = [1.0, 2.0, 2.5, 4.0];
pub const BLUR_SIGMAS: [f64; 4] = [0.8, 1.0, 1.5, 2.5];
pub const STREAK_INCREMENTS: [f64; 4] = [0.25, 0.5, 1.0, 2.0];
pub const SPARSE_VIEWS: [usize; 4] = [180, 90, 60, 45];
pub const METAL_RADII_PX: [f64; 4] = [4.0, 8.0, 12.0, 16.0];

pub fn severity_params(kind: DegradationKind, level: SeverityLevel) -> SeverityParam {
    let i = level.index();
    match kind {
        DegradationKind::Noise => SeverityParam::NoiseScale(NOISE_SCALES[i]),
        DegradationKind::Blur => SeverityParam::BlurSigma(BLUR_SIGMAS[i]),
        DegradationKind::Streak => SeverityParam::StreakIncrement(STREAK_INCREMENTS[i]),
        DegradationKind::Aliasing => SeverityParam::Views(SPARSE_VIEWS[i]),
        DegradationKind::Metal => SeverityParam::MetalRadius(METAL_RADII_PX[i]),
    }
}

/// [`severity_params`] addressed by family name.
pub fn severity_params_by_name(kind: &str, level: SeverityLevel) -> Result<SeverityParam> {
    Ok(severity_params(kind.parse()?, level))
}
