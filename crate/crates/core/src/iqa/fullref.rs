use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::filter::{gaussian_taps, local_moments, Plane};
use crate::error::{Error, Result};
use crate::tomo::{Mask, Raster};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;
const VIF_SCALES: u32 = 4;
const VIF_NOISE_VAR: f64 = 2.0;
const VIF_EPS: f64 = 1e-10;

/// Intensity window taken from the reference inside the mask. Both images of
/// a pair are mapped through it before SSIM and VIF.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceWindow {
    pub min: f64,
    /// `max - min`, or 1 when the reference is constant inside the mask.
    pub range: f64,
}

impl ReferenceWindow {
    pub fn of(reference: &Raster, mask: &Mask) -> Result<Self> {
        mask.ensure_shape(reference.shape())?;
        let (lo, hi) = reference
            .values()
            .iter()
            .zip(mask.bits())
            .filter(|(_, &m)| m)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&v, _)| {
                (lo.min(v), hi.max(v))
            });
        if lo > hi {
            return Err(Error::Empty("mask selects no pixels"));
        }
        let range = if hi > lo { hi - lo } else { 1.0 };
        Ok(Self { min: lo, range })
    }

    fn normalise(&self, img: &Raster, scale: f64) -> Plane {
        let (h, w) = img.shape();
        Plane::new(
            h,
            w,
            img.values()
                .iter()
                .map(|v| (v - self.min) / self.range * scale)
                .collect(),
        )
    }
}

fn check_pair(reference: &Raster, degraded: &Raster, mask: &Mask) -> Result<()> {
    reference.ensure_same_shape(degraded)?;
    mask.ensure_shape(reference.shape())?;
    crate::error::check_finite(reference.values())?;
    crate::error::check_finite(degraded.values())
}

/// Peak signal-to-noise ratio in dB over masked pixels, with the peak taken
/// as the reference range inside the mask. Identical inputs give `+∞`.
pub fn psnr(reference: &Raster, degraded: &Raster, mask: &Mask) -> Result<f64> {
    check_pair(reference, degraded, mask)?;
    let window = ReferenceWindow::of(reference, mask)?;
    let (sum, n) = reference
        .values()
        .iter()
        .zip(degraded.values())
        .zip(mask.bits())
        .filter(|(_, &m)| m)
        .fold((0.0, 0usize), |(s, n), ((a, b), _)| (s + (a - b).powi(2), n + 1));
    let mse = sum / n as f64;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(20.0 * (window.range / mse.sqrt()).log10())
}

/// Mean SSIM over mask pixels whose 11×11 window lies inside the image,
/// after mapping both images through the reference window.
pub fn ssim(reference: &Raster, degraded: &Raster, mask: &Mask) -> Result<f64> {
    check_pair(reference, degraded, mask)?;
    let window = ReferenceWindow::of(reference, mask)?;
    ssim_windowed(reference, degraded, mask, window)
}

/// SSIM with an explicit intensity window; symmetric in the two images.
pub fn ssim_windowed(
    a: &Raster,
    b: &Raster,
    mask: &Mask,
    window: ReferenceWindow,
) -> Result<f64> {
    check_pair(a, b, mask)?;
    let x = window.normalise(a, 1.0);
    let y = window.normalise(b, 1.0);
    let taps = gaussian_taps(SSIM_WINDOW, SSIM_SIGMA);
    let m = local_moments(&x, &y, &taps);
    let c1 = SSIM_K1 * SSIM_K1;
    let c2 = SSIM_K2 * SSIM_K2;
    let half = SSIM_WINDOW / 2;

    let mut sum = 0.0;
    let mut count = 0usize;
    for r in 0..m.mean_x.height {
        for c in 0..m.mean_x.width {
            if !mask.get(r + half, c + half) {
                continue;
            }
            let (mx, my) = (m.mean_x.get(r, c), m.mean_y.get(r, c));
            let num = (2.0 * mx * my + c1) * (2.0 * m.cov.get(r, c) + c2);
            let den = (mx * mx + my * my + c1) * (m.var_x.get(r, c) + m.var_y.get(r, c) + c2);
            sum += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::Empty("no SSIM window centre inside the mask"));
    }
    Ok(sum / count as f64)
}

/// Pixel-domain visual information fidelity over four dyadic scales.
///
/// Images are mapped through the reference window onto [0, 255]. Window
/// centres outside the mask are skipped at every scale. A reference with no
/// local variance inside the mask carries no information and is an error.
pub fn vif(reference: &Raster, degraded: &Raster, mask: &Mask) -> Result<f64> {
    check_pair(reference, degraded, mask)?;
    let window = ReferenceWindow::of(reference, mask)?;
    let mut x = window.normalise(reference, 255.0);
    let mut y = window.normalise(degraded, 255.0);
    // position of plane sample (i, j) in original pixels: offset + stride·(i, j)
    let mut offset = 0usize;
    let mut stride = 1usize;
    let mut num = 0.0;
    let mut den = 0.0;

    for scale in 1..=VIF_SCALES {
        let n = (1usize << (VIF_SCALES - scale + 1)) + 1;
        let taps = gaussian_taps(n, n as f64 / 5.0);
        if scale > 1 {
            x = x.filter_valid(&taps).decimate();
            y = y.filter_valid(&taps).decimate();
            offset += stride * (n - 1) / 2;
            stride *= 2;
        }
        let m = local_moments(&x, &y, &taps);
        let centre = offset + stride * (n - 1) / 2;
        for r in 0..m.mean_x.height {
            for c in 0..m.mean_x.width {
                if !mask.get(centre + stride * r, centre + stride * c) {
                    continue;
                }
                let mut s1 = m.var_x.get(r, c).max(0.0);
                let s2 = m.var_y.get(r, c).max(0.0);
                let s12 = m.cov.get(r, c);
                let mut g = s12 / (s1 + VIF_EPS);
                let mut sv = s2 - g * s12;
                if s1 < VIF_EPS {
                    g = 0.0;
                    sv = s2;
                    s1 = 0.0;
                }
                if s2 < VIF_EPS {
                    g = 0.0;
                    sv = 0.0;
                }
                if g < 0.0 {
                    sv = s2;
                    g = 0.0;
                }
                sv = sv.max(VIF_EPS);
                num += (1.0 + g * g * s1 / (sv + VIF_NOISE_VAR)).log10();
                den += (1.0 + s1 / VIF_NOISE_VAR).log10();
            }
        }
    }
    if den <= 0.0 {
        return Err(Error::Degenerate(
            "reference has no local variance inside the mask".into(),
        ));
    }
    Ok(num / den)
}

/// Full-reference metrics available to reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricName {
    Psnr,
    Ssim,
    Vif,
}

impl MetricName {
    pub const ALL: [Self; 3] = [Self::Psnr, Self::Ssim, Self::Vif];

    pub fn name(self) -> &'static str {
        match self {
            Self::Psnr => "psnr",
            Self::Ssim => "ssim",
            Self::Vif => "vif",
        }
    }

    pub fn higher_is_better(self) -> bool {
        true
    }

    pub fn compute(self, reference: &Raster, degraded: &Raster, mask: &Mask) -> Result<MetricValue> {
        let value = match self {
            Self::Psnr => psnr(reference, degraded, mask)?,
            Self::Ssim => ssim(reference, degraded, mask)?,
            Self::Vif => vif(reference, degraded, mask)?,
        };
        Ok(MetricValue {
            name: self,
            value,
            higher_is_better: self.higher_is_better(),
        })
    }
}

impl fmt::Display for MetricName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let lower = s.trim().to_ascii_lowercase();
        Self::ALL
            .into_iter()
            .find(|m| m.name() == lower)
            .ok_or_else(|| Error::UnknownName(format!("metric '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub name: MetricName,
    /// PSNR is `+∞` for identical images.
    pub value: f64,
    pub higher_is_better: bool,
}
