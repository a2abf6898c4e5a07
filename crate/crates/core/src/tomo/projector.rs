use rayon::prelude::*;

use super::geometry::{Geometry, Sinogram};
use super::raster::{AttenuationMap, Raster};
use crate::error::{Error, Result};

/// Bilinear sample with zero outside the raster.
#[inline]
pub(crate) fn bilinear(raster: &Raster, row: f64, col: f64) -> f64 {
    let (h, w) = raster.shape();
    let r0f = row.floor();
    let c0f = col.floor();
    let fr = row - r0f;
    let fc = col - c0f;
    let r0 = r0f as isize;
    let c0 = c0f as isize;
    let values = raster.values();
    let mut acc = 0.0;
    for (dr, wr) in [(0isize, 1.0 - fr), (1, fr)] {
        let r = r0 + dr;
        if r < 0 || r >= h as isize || wr == 0.0 {
            continue;
        }
        let base = r as usize * w;
        for (dc, wc) in [(0isize, 1.0 - fc), (1, fc)] {
            let c = c0 + dc;
            if c < 0 || c >= w as isize || wc == 0.0 {
                continue;
            }
            acc += wr * wc * values[base + c as usize];
        }
    }
    acc
}

/// Integer range of `k` with `lo < x0 + slope·k < hi`, intersected with `bound`.
fn clip_axis(x0: f64, slope: f64, lo: f64, hi: f64, bound: (f64, f64)) -> (f64, f64) {
    if slope.abs() < 1e-12 {
        if x0 > lo && x0 < hi {
            bound
        } else {
            (1.0, 0.0)
        }
    } else {
        let a = (lo - x0) / slope;
        let b = (hi - x0) / slope;
        let (a, b) = if a < b { (a, b) } else { (b, a) };
        (bound.0.max(a), bound.1.min(b))
    }
}

/// Parallel-beam forward projection.
///
/// Each ray is sampled at pixel-spacing steps with bilinear interpolation and
/// the samples are summed times the step length, so the output is a line
/// integral in units of (map units)·mm.
pub fn radon(map: &AttenuationMap, geometry: &Geometry) -> Result<Sinogram> {
    let grid = geometry.grid();
    if map.shape() != (grid.height, grid.width) {
        return Err(Error::ShapeMismatch {
            expected: (grid.height, grid.width),
            actual: map.shape(),
        });
    }
    if (map.pixel_spacing_mm() - grid.pixel_spacing_mm).abs() > 1e-9 * grid.pixel_spacing_mm {
        return Err(Error::Geometry(format!(
            "map spacing {} mm differs from geometry spacing {} mm",
            map.pixel_spacing_mm(),
            grid.pixel_spacing_mm
        )));
    }
    let ps = grid.pixel_spacing_mm;
    let (rc, cc) = geometry.rotation_center();
    let (h, w) = (grid.height as f64, grid.width as f64);
    // farthest grid corner from the rotation centre, in pixels
    let reach = [(-0.5, -0.5), (-0.5, w - 0.5), (h - 0.5, -0.5), (h - 0.5, w - 0.5)]
        .iter()
        .map(|&(r, c): &(f64, f64)| (r - rc).hypot(c - cc))
        .fold(0.0, f64::max)
        .ceil()
        + 1.0;

    let nd = geometry.num_detectors();
    let mut values = vec![0.0; geometry.num_views() * nd];
    let raster: &Raster = map;
    values
        .par_chunks_mut(nd)
        .zip(geometry.angles_deg().par_iter())
        .for_each(|(row_out, &angle)| {
            let (sin, cos) = angle.to_radians().sin_cos();
            for (d, out) in row_out.iter_mut().enumerate() {
                let t = geometry.detector_offset_mm(d) / ps;
                let col0 = cc + t * cos;
                let row0 = rc + t * sin;
                let range = clip_axis(col0, -sin, -1.0, w, (-reach, reach));
                let (lo, hi) = clip_axis(row0, cos, -1.0, h, range);
                if lo > hi {
                    continue;
                }
                let (k_lo, k_hi) = (lo.ceil() as i64, hi.floor() as i64);
                let mut acc = 0.0;
                for k in k_lo..=k_hi {
                    let k = k as f64;
                    acc += bilinear(raster, row0 + cos * k, col0 - sin * k);
                }
                *out = acc * ps;
            }
        });
    Sinogram::new(geometry.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::raster::ImageGrid;

    fn disk(size: usize, radius: f64, value: f64) -> AttenuationMap {
        let c = (size as f64 - 1.0) / 2.0;
        // area coverage from 8x8 subsamples per pixel
        let sub = 8;
        let values = (0..size * size)
            .map(|i| {
                let (r, col) = ((i / size) as f64, (i % size) as f64);
                let mut inside = 0;
                for a in 0..sub {
                    for b in 0..sub {
                        let dr = r - 0.5 + (a as f64 + 0.5) / sub as f64 - c;
                        let dc = col - 0.5 + (b as f64 + 0.5) / sub as f64 - c;
                        if dr.hypot(dc) <= radius {
                            inside += 1;
                        }
                    }
                }
                value * inside as f64 / (sub * sub) as f64
            })
            .collect();
        AttenuationMap::new(size, size, 1.0, values).unwrap()
    }

    #[test]
    fn zero_map_projects_to_zero() {
        let grid = ImageGrid::square(32, 1.0);
        let g = Geometry::parallel_beam(grid, 12).unwrap();
        let map = AttenuationMap::filled(32, 32, 1.0, 0.0).unwrap();
        let s = radon(&map, &g).unwrap();
        assert!(s.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn central_chord_of_a_disk() {
        for radius in [10.0, 20.0, 40.0] {
            let size = 128;
            let mu = 0.02;
            let map = disk(size, radius, mu);
            let g = Geometry::parallel_beam(ImageGrid::square(size, 1.0), 36).unwrap();
            let s = radon(&map, &g).unwrap();
            let nd = g.num_detectors();
            // even detector count: the centre sits between bins nd/2 - 1 and nd/2
            for v in 0..g.num_views() {
                let centre = 0.5 * (s.get(v, nd / 2 - 1) + s.get(v, nd / 2));
                let expected = 2.0 * radius * mu;
                assert!(
                    (centre - expected).abs() / expected < 0.02,
                    "r={radius} view {v}: {centre} vs {expected}"
                );
            }
        }
    }

    #[test]
    fn rejects_mismatched_map() {
        let g = Geometry::parallel_beam(ImageGrid::square(32, 1.0), 4).unwrap();
        let map = AttenuationMap::filled(16, 16, 1.0, 0.0).unwrap();
        assert!(radon(&map, &g).is_err());
        let map = AttenuationMap::filled(32, 32, 2.0, 0.0).unwrap();
        assert!(radon(&map, &g).is_err());
    }
}
