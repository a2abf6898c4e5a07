/// Normalised 1-D Gaussian taps of length `n`.
pub(crate) fn gaussian_taps(n: usize, sigma: f64) -> Vec<f64> {
    let c = (n as f64 - 1.0) / 2.0;
    let taps: Vec<f64> = (0..n)
        .map(|i| (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / sum).collect()
}

/// Row-major plane used by the windowed statistics.
#[derive(Debug, Clone)]
pub(crate) struct Plane {
    pub height: usize,
    pub width: usize,
    pub values: Vec<f64>,
}

impl Plane {
    pub fn new(height: usize, width: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), height * width);
        Self {
            height,
            width,
            values,
        }
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.values[r * self.width + c]
    }

    pub fn zip_map(&self, other: &Plane, f: impl Fn(f64, f64) -> f64) -> Plane {
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Plane::new(self.height, self.width, values)
    }

    /// Separable correlation keeping only positions where the whole window
    /// fits. Output is `(h - n + 1) × (w - n + 1)`; empty if the window is
    /// larger than the plane.
    pub fn filter_valid(&self, taps: &[f64]) -> Plane {
        let n = taps.len();
        if self.height < n || self.width < n {
            return Plane::new(0, 0, Vec::new());
        }
        let (oh, ow) = (self.height - n + 1, self.width - n + 1);
        let mut horizontal = Vec::with_capacity(self.height * ow);
        for r in 0..self.height {
            let row = &self.values[r * self.width..(r + 1) * self.width];
            for c in 0..ow {
                horizontal.push(row[c..c + n].iter().zip(taps).map(|(v, t)| v * t).sum::<f64>());
            }
        }
        let mut out = vec![0.0; oh * ow];
        for (k, &t) in taps.iter().enumerate() {
            for r in 0..oh {
                let src = &horizontal[(r + k) * ow..(r + k + 1) * ow];
                let dst = &mut out[r * ow..(r + 1) * ow];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += t * s;
                }
            }
        }
        Plane::new(oh, ow, out)
    }

    /// Keeps every second row and column starting at the first.
    pub fn decimate(&self) -> Plane {
        let (h, w) = (self.height.div_ceil(2), self.width.div_ceil(2));
        let mut values = Vec::with_capacity(h * w);
        for r in (0..self.height).step_by(2) {
            for c in (0..self.width).step_by(2) {
                values.push(self.get(r, c));
            }
        }
        Plane::new(h, w, values)
    }
}

/// Local first and second moments under a Gaussian window.
pub(crate) struct LocalMoments {
    pub mean_x: Plane,
    pub mean_y: Plane,
    pub var_x: Plane,
    pub var_y: Plane,
    pub cov: Plane,
}

pub(crate) fn local_moments(x: &Plane, y: &Plane, taps: &[f64]) -> LocalMoments {
    let mean_x = x.filter_valid(taps);
    let mean_y = y.filter_valid(taps);
    let xx = x.zip_map(x, |a, b| a * b).filter_valid(taps);
    let yy = y.zip_map(y, |a, b| a * b).filter_valid(taps);
    let xy = x.zip_map(y, |a, b| a * b).filter_valid(taps);
    let var_x = xx.zip_map(&mean_x, |s, m| s - m * m);
    let var_y = yy.zip_map(&mean_y, |s, m| s - m * m);
    let cov = Plane::new(
        xy.height,
        xy.width,
        (0..xy.values.len())
            .map(|i| xy.values[i] - mean_x.values[i] * mean_y.values[i])
            .collect(),
    );
    LocalMoments {
        mean_x,
        mean_y,
        var_x,
        var_y,
        cov,
    }
}
