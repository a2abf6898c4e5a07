use serde::{Deserialize, Serialize};

use super::raster::ImageGrid;
use crate::error::{check_finite, Error, Result};

/// Number of views in the dense acquisition. Divisible by every sparse-view
/// level (180, 90, 60, 45) so those sinograms are exact row subsets.
pub const FULL_VIEW_COUNT: usize = 360;

/// Parallel-beam acquisition geometry together with the image grid it images.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    angles_deg: Vec<f64>,
    num_detectors: usize,
    detector_spacing_mm: f64,
    /// (row, col) in pixel coordinates of the image grid.
    rotation_center: (f64, f64),
    grid: ImageGrid,
}

/// Smallest even detector count that covers the grid diagonal at unit magnification.
pub fn standard_detector_count(grid: &ImageGrid) -> usize {
    let n = ((grid.height.max(grid.width) as f64) * std::f64::consts::SQRT_2).ceil() as usize;
    n + n % 2
}

pub fn uniform_angles(num_views: usize) -> Vec<f64> {
    (0..num_views)
        .map(|i| 180.0 * i as f64 / num_views as f64)
        .collect()
}

impl Geometry {
    pub fn new(
        grid: ImageGrid,
        angles_deg: Vec<f64>,
        num_detectors: usize,
        detector_spacing_mm: f64,
        rotation_center: (f64, f64),
    ) -> Result<Self> {
        if angles_deg.is_empty() {
            return Err(Error::Geometry("at least one view angle is required".into()));
        }
        check_finite(&angles_deg)?;
        if angles_deg.iter().any(|a| !(0.0..180.0).contains(a)) {
            return Err(Error::Geometry("view angles must lie in [0, 180)".into()));
        }
        if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Geometry("view angles must be strictly increasing".into()));
        }
        if num_detectors == 0 {
            return Err(Error::Geometry("detector count must be positive".into()));
        }
        if !(detector_spacing_mm.is_finite() && detector_spacing_mm > 0.0) {
            return Err(Error::Geometry(format!(
                "detector spacing must be positive, got {detector_spacing_mm}"
            )));
        }
        if grid.height == 0 || grid.width == 0 || !(grid.pixel_spacing_mm > 0.0) {
            return Err(Error::Geometry("image grid must be non-empty".into()));
        }
        let span = num_detectors as f64 * detector_spacing_mm;
        // small slack so the standard count (ceil of √2·N) always passes
        if span + 1e-9 < grid.diagonal_mm() * (1.0 - 1e-12) {
            return Err(Error::Geometry(format!(
                "detector array spans {span:.3} mm but the grid diagonal is {:.3} mm",
                grid.diagonal_mm()
            )));
        }
        Ok(Self {
            angles_deg,
            num_detectors,
            detector_spacing_mm,
            rotation_center,
            grid,
        })
    }

    /// Uniform views over [0°, 180°), standard detector count, detector spacing
    /// equal to pixel spacing, rotation about the grid centre.
    pub fn parallel_beam(grid: ImageGrid, num_views: usize) -> Result<Self> {
        Self::new(
            grid,
            uniform_angles(num_views),
            standard_detector_count(&grid),
            grid.pixel_spacing_mm,
            grid.center(),
        )
    }

    /// The dense 360-view geometry used for references and single degradations.
    pub fn full(grid: ImageGrid) -> Result<Self> {
        Self::parallel_beam(grid, FULL_VIEW_COUNT)
    }

    /// Every `(num_views / n_views)`-th view of this geometry.
    pub fn subsample(&self, n_views: usize) -> Result<Self> {
        let total = self.num_views();
        if n_views == 0 || !total.is_multiple_of(n_views) {
            return Err(Error::InvalidParameter(format!(
                "{n_views} views is not a divisor of the {total}-view geometry"
            )));
        }
        let stride = total / n_views;
        Ok(Self {
            angles_deg: self.angles_deg.iter().step_by(stride).copied().collect(),
            ..self.clone()
        })
    }

    pub fn with_angles(&self, angles_deg: Vec<f64>) -> Result<Self> {
        Self::new(
            self.grid,
            angles_deg,
            self.num_detectors,
            self.detector_spacing_mm,
            self.rotation_center,
        )
    }

    pub fn num_views(&self) -> usize {
        self.angles_deg.len()
    }

    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn num_detectors(&self) -> usize {
        self.num_detectors
    }

    pub fn detector_spacing_mm(&self) -> f64 {
        self.detector_spacing_mm
    }

    pub fn rotation_center(&self) -> (f64, f64) {
        self.rotation_center
    }

    pub fn grid(&self) -> ImageGrid {
        self.grid
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.num_views(), self.num_detectors)
    }

    /// Signed offset of detector bin `d` from the central ray, in mm.
    pub(crate) fn detector_offset_mm(&self, d: usize) -> f64 {
        (d as f64 - (self.num_detectors as f64 - 1.0) / 2.0) * self.detector_spacing_mm
    }
}

/// Line integrals of attenuation, one row per view.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    geometry: Geometry,
    values: Vec<f64>,
}

impl Sinogram {
    pub fn new(geometry: Geometry, values: Vec<f64>) -> Result<Self> {
        let (v, d) = geometry.shape();
        if values.len() != v * d {
            return Err(Error::InvalidParameter(format!(
                "sinogram of shape {v}x{d} needs {} values, got {}",
                v * d,
                values.len()
            )));
        }
        check_finite(&values)?;
        Ok(Self { geometry, values })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let n = geometry.num_views() * geometry.num_detectors();
        Self {
            geometry,
            values: vec![0.0; n],
        }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn shape(&self) -> (usize, usize) {
        self.geometry.shape()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Mutable access to the samples. Callers must keep values finite.
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn view(&self, v: usize) -> &[f64] {
        let d = self.geometry.num_detectors;
        &self.values[v * d..(v + 1) * d]
    }

    pub fn get(&self, view: usize, detector: usize) -> f64 {
        self.values[view * self.geometry.num_detectors + detector]
    }

    /// Keeps the rows whose indices are listed, in that order.
    pub fn select_views(&self, rows: &[usize]) -> Result<Self> {
        let angles = rows.iter().map(|&r| self.geometry.angles_deg[r]).collect();
        let geometry = self.geometry.with_angles(angles)?;
        let values = rows.iter().flat_map(|&r| self.view(r).iter().copied()).collect();
        Ok(Self { geometry, values })
    }

    pub(crate) fn with_values(&self, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), self.values.len());
        Self {
            geometry: self.geometry.clone(),
            values,
        }
    }
}
