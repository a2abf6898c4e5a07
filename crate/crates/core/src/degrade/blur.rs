use crate::error::{Error, Result};
use crate::tomo::Sinogram;

/// Sampled Gaussian of radius `ceil(4σ)`, normalized to unit sum.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (4.0 * sigma).ceil() as isize;
    let mut k: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= sum);
    k
}

/// Half-sample symmetric reflection into `0..n`.
fn reflect(mut i: isize, n: isize) -> usize {
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

pub(crate) fn convolve_symmetric(row: &[f64], kernel: &[f64], out: &mut [f64]) {
    let n = row.len() as isize;
    let radius = (kernel.len() / 2) as isize;
    for (i, o) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &w) in kernel.iter().enumerate() {
            acc += w * row[reflect(i as isize + j as isize - radius, n)];
        }
        *o = acc;
    }
}

/// Gaussian blur along the detector axis only; views are untouched.
pub fn apply_blur(sinogram: &Sinogram, sigma: f64) -> Result<Sinogram> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "blur sigma must be positive, got {sigma}"
        )));
    }
    let kernel = gaussian_kernel(sigma);
    let nd = sinogram.geometry().num_detectors();
    let mut values = vec![0.0; sinogram.values().len()];
    for (v, out) in values.chunks_mut(nd).enumerate() {
        convolve_symmetric(sinogram.view(v), &kernel, out);
    }
    Ok(sinogram.with_values(values))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomo::{Geometry, ImageGrid};

    fn geometry() -> Geometry {
        Geometry::parallel_beam(ImageGrid::square(32, 1.0), 6).unwrap()
    }

    #[test]
    fn kernel_sums_to_one() {
        for s in [0.8, 1.0, 1.5, 2.5] {
            let k = gaussian_kernel(s);
            assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-6);
            assert_eq!(k.len() % 2, 1);
        }
    }

    #[test]
    fn constant_unchanged() {
        let g = geometry();
        let n = g.num_views() * g.num_detectors();
        let s = Sinogram::new(g, vec![3.25; n]).unwrap();
        let b = apply_blur(&s, 2.5).unwrap();
        for v in b.values() {
            assert!((v - 3.25).abs() < 1e-12);
        }
    }

    #[test]
    fn impulse_reproduces_kernel() {
        let g = geometry();
        let nd = g.num_detectors();
        let mut values = vec![0.0; g.num_views() * nd];
        let centre = nd / 2;
        values[2 * nd + centre] = 1.0;
        let s = Sinogram::new(g, values).unwrap();
        let b = apply_blur(&s, 1.5).unwrap();
        let k = gaussian_kernel(1.5);
        let r = k.len() / 2;
        for (j, w) in k.iter().enumerate() {
            assert!((b.get(2, centre + j - r) - w).abs() < 1e-15);
        }
        // other views untouched
        assert!(b.view(1).iter().all(|&v| v == 0.0));
        assert!((b.view(2).iter().sum::<f64>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn interior_view_sum_preserved() {
        // Sum oracle: a bump well inside the detector range keeps its mass.
        let g = geometry();
        let nd = g.num_detectors();
        let values: Vec<f64> = (0..g.num_views() * nd)
            .map(|i| {
                let d = (i % nd) as f64 - nd as f64 / 2.0;
                (-(d * d) / 18.0).exp() * (1.0 + (i / nd) as f64)
            })
            .collect();
        let s = Sinogram::new(g.clone(), values).unwrap();
        let b = apply_blur(&s, 2.5).unwrap();
        for v in 0..g.num_views() {
            let before: f64 = s.view(v).iter().sum();
            let after: f64 = b.view(v).iter().sum();
            assert!((before - after).abs() / before < 1e-3);
        }
    }

    #[test]
    fn rejects_non_positive_sigma() {
        assert!(apply_blur(&Sinogram::zeros(geometry()), 0.0).is_err());
    }

    #[test]
    fn reflection_handles_wide_kernels() {
        assert_eq!(reflect(-1, 3), 0);
        assert_eq!(reflect(3, 3), 2);
        assert_eq!(reflect(-4, 3), 2);
        assert_eq!(reflect(7, 3), 1);
    }
}
