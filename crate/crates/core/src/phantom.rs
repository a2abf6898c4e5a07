//! Procedural abdominal-like phantoms standing in for clinical reference slices.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tomo::{Image, AIR_HU};

/// Field of view of generated phantoms in mm; pixel spacing is `FOV / size`.
pub const PHANTOM_FOV_MM: f64 = 360.0;
pub const MIN_PHANTOM_SIZE: usize = 64;

const SUPERSAMPLE: usize = 3;

#[derive(Debug, Clone, Copy)]
struct Ellipse {
    row: f64,
    col: f64,
    /// Semi-axis along columns before rotation.
    semi_col: f64,
    semi_row: f64,
    cos: f64,
    sin: f64,
    hu: f64,
}

impl Ellipse {
    fn new(row: f64, col: f64, semi_col: f64, semi_row: f64, angle: f64, hu: f64) -> Self {
        Self {
            row,
            col,
            semi_col,
            semi_row,
            cos: angle.cos(),
            sin: angle.sin(),
            hu,
        }
    }

    fn contains(&self, row: f64, col: f64) -> bool {
        let dr = row - self.row;
        let dc = col - self.col;
        let u = dc * self.cos + dr * self.sin;
        let v = -dc * self.sin + dr * self.cos;
        (u / self.semi_col).powi(2) + (v / self.semi_row).powi(2) <= 1.0
    }
}

/// Uniform point in the unit disk scaled to `radius` of the body ellipse.
fn point_in_body(rng: &mut impl Rng, body: &Ellipse, radius: f64) -> (f64, f64) {
    loop {
        let x: f64 = rng.random_range(-1.0..1.0);
        let y: f64 = rng.random_range(-1.0..1.0);
        if x * x + y * y <= 1.0 {
            return (
                body.row + y * radius * body.semi_row,
                body.col + x * radius * body.semi_col,
            );
        }
    }
}

/// Ellipse phantom: a ~40 HU body, two lateral ~−700 HU regions, 4–8 soft
/// tissue/contrast ellipses in [−150, 300] HU and a scatter of small bright
/// vessels, on −1000 HU air. Edges are anti-aliased by 3×3 supersampling.
/// All values lie in [−1000, 400] HU.
pub fn make_phantom(size: usize, seed: u64) -> Result<Image> {
    if size < MIN_PHANTOM_SIZE {
        return Err(Error::InvalidParameter(format!(
            "phantom size must be at least {MIN_PHANTOM_SIZE}, got {size}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as f64;
    let centre = (n - 1.0) / 2.0;

    let body = Ellipse::new(
        centre + rng.random_range(-0.01..0.01) * n,
        centre + rng.random_range(-0.01..0.01) * n,
        rng.random_range(0.42..0.46) * n,
        rng.random_range(0.31..0.36) * n,
        0.0,
        rng.random_range(30.0..50.0),
    );
    let mut shapes = vec![body];

    for side in [-1.0, 1.0] {
        shapes.push(Ellipse::new(
            body.row + rng.random_range(-0.2..0.2) * body.semi_row,
            body.col + side * rng.random_range(0.45..0.6) * body.semi_col,
            rng.random_range(0.18..0.28) * body.semi_col,
            rng.random_range(0.30..0.45) * body.semi_row,
            rng.random_range(-0.3..0.3),
            rng.random_range(-720.0..-680.0),
        ));
    }

    for _ in 0..rng.random_range(4..=8) {
        let (row, col) = point_in_body(&mut rng, &body, 0.55);
        shapes.push(Ellipse::new(
            row,
            col,
            rng.random_range(0.04..0.12) * n,
            rng.random_range(0.04..0.12) * n,
            rng.random_range(0.0..std::f64::consts::PI),
            rng.random_range(-150.0..300.0),
        ));
    }

    for _ in 0..rng.random_range(10..=20) {
        let (row, col) = point_in_body(&mut rng, &body, 0.8);
        let r = rng.random_range(1.0..3.0) * n / 256.0;
        shapes.push(Ellipse::new(row, col, r, r, 0.0, rng.random_range(150.0..300.0)));
    }

    let offsets: Vec<f64> = (0..SUPERSAMPLE)
        .map(|i| (i as f64 + 0.5) / SUPERSAMPLE as f64 - 0.5)
        .collect();
    let weight = 1.0 / (SUPERSAMPLE * SUPERSAMPLE) as f64;
    // only pixels near the body can differ from air
    let hull = Ellipse {
        semi_col: body.semi_col + 2.0,
        semi_row: body.semi_row + 2.0,
        ..body
    };
    let mut values = vec![AIR_HU; size * size];
    for (i, v) in values.iter_mut().enumerate() {
        let (r, c) = ((i / size) as f64, (i % size) as f64);
        if !hull.contains(r, c) {
            continue;
        }
        let mut acc = 0.0;
        for &dr in &offsets {
            for &dc in &offsets {
                let (sr, sc) = (r + dr, c + dc);
                let hu = shapes
                    .iter()
                    .rev()
                    .find(|e| e.contains(sr, sc))
                    .map_or(AIR_HU, |e| e.hu);
                acc += hu;
            }
        }
        *v = acc * weight;
    }
    Image::new(size, size, PHANTOM_FOV_MM / n, values)
}
