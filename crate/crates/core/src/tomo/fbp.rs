use std::f64::consts::PI;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::geometry::Sinogram;
use super::raster::{AttenuationMap, Mask};
use crate::error::{Error, Result};

/// Frequency response of the band-limited Ram-Lak ramp for a padded length.
///
/// Built from the discrete spatial kernel (h[0] = 1/4, h[odd k] = -1/(πk)²,
/// in units of 1/spacing²) so the zero-frequency gain is exact rather than
/// clipped to zero.
fn ram_lak_response(padded: usize) -> Vec<Complex<f64>> {
    let mut kernel = vec![Complex::new(0.0, 0.0); padded];
    kernel[0].re = 0.25;
    for k in (1..padded / 2).step_by(2) {
        let v = -1.0 / (PI * k as f64).powi(2);
        kernel[k].re = v;
        kernel[padded - k].re = v;
    }
    FftPlanner::new().plan_fft_forward(padded).process(&mut kernel);
    kernel
}

/// Ramp-filters every view. Output rows are in mm⁻²·(line-integral units)
/// scaled so that backprojection with `π / num_views` yields attenuation.
pub(crate) fn ramp_filter(sinogram: &Sinogram) -> Vec<f64> {
    let geometry = sinogram.geometry();
    let nd = geometry.num_detectors();
    let padded = (2 * nd).next_power_of_two();
    let response = ram_lak_response(padded);
    let mut planner = FftPlanner::new();
    let forward = planner.plan_fft_forward(padded);
    let inverse = planner.plan_fft_inverse(padded);
    // kernel units 1/ds², convolution sum times ds
    let scale = 1.0 / (geometry.detector_spacing_mm() * padded as f64);

    let mut filtered = vec![0.0; sinogram.values().len()];
    filtered
        .par_chunks_mut(nd)
        .enumerate()
        .for_each_init(
            || vec![Complex::new(0.0, 0.0); padded],
            |buf, (v, out)| {
                buf.iter_mut().for_each(|c| *c = Complex::new(0.0, 0.0));
                for (b, &x) in buf.iter_mut().zip(sinogram.view(v)) {
                    b.re = x;
                }
                forward.process(buf);
                for (b, r) in buf.iter_mut().zip(&response) {
                    *b *= r;
                }
                inverse.process(buf);
                for (o, b) in out.iter_mut().zip(buf.iter()) {
                    *o = b.re * scale;
                }
            },
        );
    filtered
}

/// Filtered backprojection onto the geometry's image grid.
///
/// Pixels outside the inscribed reconstruction circle are set to zero
/// attenuation (−1000 HU after conversion).
pub fn fbp(sinogram: &Sinogram) -> Result<AttenuationMap> {
    let geometry = sinogram.geometry();
    if geometry.num_views() < 2 {
        return Err(Error::Geometry(format!(
            "filtered backprojection needs at least 2 views, got {}",
            geometry.num_views()
        )));
    }
    let grid = geometry.grid();
    let filtered = ramp_filter(sinogram);
    let nd = geometry.num_detectors();
    let ps = grid.pixel_spacing_mm;
    let ds = geometry.detector_spacing_mm();
    let (rc, cc) = geometry.rotation_center();
    let centre_bin = (nd as f64 - 1.0) / 2.0;
    let trig: Vec<(f64, f64)> = geometry
        .angles_deg()
        .iter()
        .map(|a| a.to_radians().sin_cos())
        .collect();
    let weight = PI / geometry.num_views() as f64;
    let circle = Mask::reconstruction_circle(grid.height, grid.width);

    let mut values = vec![0.0; grid.height * grid.width];
    values
        .par_chunks_mut(grid.width)
        .enumerate()
        .for_each(|(r, row_out)| {
            let y = (r as f64 - rc) * ps / ds;
            for (c, out) in row_out.iter_mut().enumerate() {
                if !circle.get(r, c) {
                    continue;
                }
                let x = (c as f64 - cc) * ps / ds;
                let mut acc = 0.0;
                for (v, &(sin, cos)) in trig.iter().enumerate() {
                    let t = x * cos + y * sin + centre_bin;
                    let t0 = t.floor();
                    let i = t0 as isize;
                    if i < -1 || i >= nd as isize {
                        continue;
                    }
                    let f = t - t0;
                    let row = &filtered[v * nd..(v + 1) * nd];
                    if i >= 0 {
                        acc += (1.0 - f) * row[i as usize];
                    }
                    if i + 1 < nd as isize {
                        acc += f * row[(i + 1) as usize];
                    }
                }
                *out = acc * weight;
            }
        });
    AttenuationMap::new(grid.height, grid.width, ps, values)
}
