//! Frequency-domain descriptors: log-magnitude spectrum, high-frequency
//! energy ratio and fixed radial/angular band energies.

use std::f64::consts::PI;

use base64::Engine;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{check_finite, Error, Result};
use crate::tomo::Raster;

pub const RADIAL_BANDS: usize = 8;
pub const ANGULAR_BANDS: usize = 8;
/// Normalised radius above which energy counts as high frequency.
pub const HF_THRESHOLD: f64 = 0.5;
pub const DESCRIPTOR_LEN: usize = RADIAL_BANDS + ANGULAR_BANDS + 1;

/// 2-D DFT, row-major, DC at index (0, 0).
fn fft2(height: usize, width: usize, values: &[f64]) -> Vec<Complex<f64>> {
    let mut data: Vec<Complex<f64>> = values.iter().map(|&v| Complex::new(v, 0.0)).collect();
    let mut planner = FftPlanner::new();
    let row_fft = planner.plan_fft_forward(width);
    for row in data.chunks_exact_mut(width) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(height);
    let mut column = vec![Complex::new(0.0, 0.0); height];
    for c in 0..width {
        for (r, v) in column.iter_mut().enumerate() {
            *v = data[r * width + c];
        }
        col_fft.process(&mut column);
        for (r, v) in column.iter().enumerate() {
            data[r * width + c] = *v;
        }
    }
    data
}

/// Signed frequency in cycles per sample of DFT index `k` out of `n`.
fn frequency(k: usize, n: usize) -> f64 {
    let k = k as f64;
    let n_f = n as f64;
    if k < n_f / 2.0 {
        k / n_f
    } else {
        (k - n_f) / n_f
    }
}

/// Log-magnitude spectrum `log(1 + |F|)` with DC moved to the centre
/// (index `(H/2, W/2)`).
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Spectrum {
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.width + col]
    }
}

pub fn log_magnitude_spectrum(img: &Raster) -> Result<Spectrum> {
    check_finite(img.values())?;
    let (h, w) = img.shape();
    let f = fft2(h, w, img.values());
    let mut values = vec![0.0; h * w];
    for r in 0..h {
        for c in 0..w {
            let (sr, sc) = ((r + h / 2) % h, (c + w / 2) % w);
            values[sr * w + sc] = f[r * w + c].norm().ln_1p();
        }
    }
    Ok(Spectrum {
        height: h,
        width: w,
        values,
    })
}

/// Power per AC frequency bin of the mean-subtracted image, with its
/// normalised radius (1 at Nyquist along an axis, √2 at the corner) and
/// orientation in [0, π).
struct AcPower {
    bins: Vec<(f64, f64, f64)>,
    total: f64,
}

fn ac_power(img: &Raster) -> Result<AcPower> {
    check_finite(img.values())?;
    let (h, w) = img.shape();
    let mean = img.values().iter().sum::<f64>() / (h * w) as f64;
    let centred: Vec<f64> = img.values().iter().map(|v| v - mean).collect();
    let f = fft2(h, w, &centred);
    let mut bins = Vec::with_capacity(h * w);
    let mut total = 0.0;
    for r in 0..h {
        let fr = frequency(r, h);
        for c in 0..w {
            if r == 0 && c == 0 {
                continue;
            }
            let fc = frequency(c, w);
            let power = f[r * w + c].norm_sqr();
            let radius = fr.hypot(fc) / 0.5;
            let angle = fr.atan2(fc).rem_euclid(PI);
            bins.push((radius, angle, power));
            total += power;
        }
    }
    Ok(AcPower { bins, total })
}

/// Fraction of AC power at normalised radius above [`HF_THRESHOLD`].
/// Radius is `√(f_row² + f_col²) / 0.5` with frequencies in cycles per
/// sample. An image without AC energy gives 0.
pub fn hf_energy_ratio(img: &Raster) -> Result<f64> {
    let p = ac_power(img)?;
    Ok(hf_from(&p))
}

fn hf_from(p: &AcPower) -> f64 {
    if p.total <= 0.0 {
        return 0.0;
    }
    let hf: f64 = p
        .bins
        .iter()
        .filter(|b| b.0 > HF_THRESHOLD)
        .map(|b| b.2)
        .sum();
    (hf / p.total).clamp(0.0, 1.0)
}

/// Radial and angular AC energy fractions plus the high-frequency ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralDescriptor {
    /// Equal-width annuli over normalised radius [0, √2].
    pub radial: [f64; RADIAL_BANDS],
    /// Equal-width orientation sectors over [0, π); sector 0 holds
    /// frequencies along the column axis.
    pub angular: [f64; ANGULAR_BANDS],
    pub hf_ratio: f64,
}

/// All fields are zero for an image without AC energy.
pub fn spectral_descriptor(img: &Raster) -> Result<SpectralDescriptor> {
    let p = ac_power(img)?;
    let mut radial = [0.0; RADIAL_BANDS];
    let mut angular = [0.0; ANGULAR_BANDS];
    if p.total > 0.0 {
        let r_width = 2f64.sqrt() / RADIAL_BANDS as f64;
        let a_width = PI / ANGULAR_BANDS as f64;
        for &(radius, angle, power) in &p.bins {
            let ri = ((radius / r_width) as usize).min(RADIAL_BANDS - 1);
            let ai = ((angle / a_width) as usize).min(ANGULAR_BANDS - 1);
            radial[ri] += power / p.total;
            angular[ai] += power / p.total;
        }
    }
    Ok(SpectralDescriptor {
        radial,
        angular,
        hf_ratio: hf_from(&p),
    })
}

impl SpectralDescriptor {
    /// 17 little-endian f32 values: radial, angular, hf_ratio.
    pub fn to_bytes(&self) -> Vec<u8> {
        self.radial
            .iter()
            .chain(&self.angular)
            .chain(std::iter::once(&self.hf_ratio))
            .flat_map(|&v| (v as f32).to_le_bytes())
            .collect()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != DESCRIPTOR_LEN * 4 {
            return Err(Error::Format {
                format: "spectral descriptor",
                reason: format!("expected {} bytes, got {}", DESCRIPTOR_LEN * 4, bytes.len()),
            });
        }
        let v: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        let mut radial = [0.0; RADIAL_BANDS];
        let mut angular = [0.0; ANGULAR_BANDS];
        radial.copy_from_slice(&v[..RADIAL_BANDS]);
        angular.copy_from_slice(&v[RADIAL_BANDS..RADIAL_BANDS + ANGULAR_BANDS]);
        Ok(Self {
            radial,
            angular,
            hf_ratio: v[DESCRIPTOR_LEN - 1],
        })
    }

    /// Standard base64 of [`Self::to_bytes`], as stored in sample metadata.
    pub fn to_base64(&self) -> String {
        base64::engine::general_purpose::STANDARD.encode(self.to_bytes())
    }

    pub fn from_base64(s: &str) -> Result<Self> {
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(|e| Error::Format {
                format: "spectral descriptor",
                reason: e.to_string(),
            })?;
        Self::from_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn raster(h: usize, w: usize, mut f: impl FnMut(usize, usize) -> f64) -> Raster {
        Raster::new(h, w, 1.0, (0..h * w).map(|i| f(i / w, i % w)).collect()).unwrap()
    }

    fn white(h: usize, w: usize, seed: u64) -> Raster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        raster(h, w, |_, _| rng.random::<f64>() - 0.5)
    }

    /// O(n⁴) DFT straight from the definition.
    fn naive_dft(img: &Raster) -> Vec<Complex<f64>> {
        let (h, w) = img.shape();
        let mut out = vec![Complex::new(0.0, 0.0); h * w];
        for u in 0..h {
            for v in 0..w {
                let mut acc = Complex::new(0.0, 0.0);
                for r in 0..h {
                    for c in 0..w {
                        let phase = -2.0 * PI * (u * r) as f64 / h as f64 - 2.0 * PI * (v * c) as f64 / w as f64;
                        acc += Complex::from_polar(img.get(r, c), phase);
                    }
                }
                out[u * w + v] = acc;
            }
        }
        out
    }

    #[test]
    fn fft_matches_definition() {
        let img = white(6, 10, 1);
        let fast = fft2(6, 10, img.values());
        for (a, b) in fast.iter().zip(naive_dft(&img)) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn zero_and_constant_spectra() {
        let z = log_magnitude_spectrum(&raster(8, 8, |_, _| 0.0)).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        let c = log_magnitude_spectrum(&raster(8, 6, |_, _| -2.5)).unwrap();
        for r in 0..8 {
            for col in 0..6 {
                let v = c.get(r, col);
                if (r, col) == (4, 3) {
                    assert!((v - (2.5f64 * 48.0).ln_1p()).abs() < 1e-12);
                } else {
                    assert!(v.abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn parseval() {
        let img = white(16, 20, 2);
        let f = fft2(16, 20, img.values());
        let spectral: f64 = f.iter().map(|z| z.norm_sqr()).sum();
        let spatial: f64 = img.values().iter().map(|v| v * v).sum();
        assert!((spectral - 320.0 * spatial).abs() / spectral < 1e-6);
    }

    #[test]
    fn point_symmetric_for_real_input() {
        let img = white(12, 16, 3);
        let s = log_magnitude_spectrum(&img).unwrap();
        for r in 0..12 {
            for c in 0..16 {
                let (mr, mc) = ((12 - r) % 12, (16 - c) % 16);
                assert!((s.get(r, c) - s.get(mr, mc)).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hf_ratio_examples() {
        assert_eq!(hf_energy_ratio(&raster(8, 8, |_, _| 7.0)).unwrap(), 0.0);
        assert_eq!(hf_energy_ratio(&raster(8, 8, |_, _| 0.0)).unwrap(), 0.0);
        let checker = raster(16, 16, |r, c| if (r + c) % 2 == 0 { 1.0 } else { -1.0 });
        assert!((hf_energy_ratio(&checker).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn hf_ratio_of_white_noise_is_area_fraction() {
        let (h, w) = (32, 32);
        let area = {
            let mut hi = 0;
            for r in 0..h {
                for c in 0..w {
                    if (r, c) != (0, 0) && frequency(r, h).hypot(frequency(c, w)) / 0.5 > 0.5 {
                        hi += 1;
                    }
                }
            }
            hi as f64 / (h * w - 1) as f64
        };
        let ratios: Vec<f64> = (0..100).map(|s| hf_energy_ratio(&white(h, w, 100 + s)).unwrap()).collect();
        let mean = ratios.iter().sum::<f64>() / 100.0;
        let sd = (ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / 99.0).sqrt();
        assert!((mean - area).abs() < 3.0 * sd / 10.0, "{mean} vs {area}");
    }

    #[test]
    fn hf_ratio_ignores_offset_and_descriptor_ignores_negation() {
        let img = white(16, 16, 5);
        let shifted = raster(16, 16, |r, c| img.get(r, c) + 40.0);
        let negated = raster(16, 16, |r, c| -img.get(r, c));
        assert!((hf_energy_ratio(&img).unwrap() - hf_energy_ratio(&shifted).unwrap()).abs() < 1e-12);
        let a = spectral_descriptor(&img).unwrap();
        let b = spectral_descriptor(&negated).unwrap();
        for (x, y) in a.radial.iter().chain(&a.angular).zip(b.radial.iter().chain(&b.angular)) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn descriptor_fractions_sum_to_one() {
        let d = spectral_descriptor(&white(24, 24, 6)).unwrap();
        assert!((d.radial.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        assert!((d.angular.iter().sum::<f64>() - 1.0).abs() < 1e-6);
        let z = spectral_descriptor(&raster(8, 8, |_, _| 1.0)).unwrap();
        assert!(z.radial.iter().chain(&z.angular).all(|&v| v == 0.0));
    }

    #[test]
    fn horizontal_sinusoid_fills_one_sector() {
        let img = raster(32, 32, |_, c| (2.0 * PI * 5.0 * c as f64 / 32.0).sin());
        let d = spectral_descriptor(&img).unwrap();
        assert!(d.angular[0] > 0.9, "{:?}", d.angular);
    }

    #[test]
    fn bytes_round_trip() {
        let d = spectral_descriptor(&white(16, 16, 7)).unwrap();
        let bytes = d.to_bytes();
        assert_eq!(bytes.len(), 68);
        assert_eq!(&bytes[64..], &(d.hf_ratio as f32).to_le_bytes());
        let back = SpectralDescriptor::from_base64(&d.to_base64()).unwrap();
        assert_eq!(back.to_bytes(), bytes);
        assert!(SpectralDescriptor::from_bytes(&bytes[1..]).is_err());
    }
}
