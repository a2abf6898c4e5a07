//! Binary image (`CTDI`) and sinogram (`CTDS`) files.
//!
//! Both are little-endian: a 4-byte magic, a `u32` version (1), dimensions,
//! spacing as `f32`, then `f32` payload in row-major order. Sinogram files also
//! carry one `f32` angle (degrees) per view ahead of the values.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::geometry::{standard_detector_count, Geometry, Sinogram};
use super::raster::{Image, ImageGrid};
use crate::error::{Error, Result};

const IMAGE_MAGIC: &[u8; 4] = b"CTDI";
const SINOGRAM_MAGIC: &[u8; 4] = b"CTDS";
const VERSION: u32 = 1;

fn format_err(format: &'static str, reason: impl Into<String>) -> Error {
    Error::Format {
        format,
        reason: reason.into(),
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32(r: &mut impl Read) -> Result<f32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(f32::from_le_bytes(b))
}

fn read_f32s(r: &mut impl Read, n: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; n * 4];
    r.read_exact(&mut bytes)?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

fn write_f32s(w: &mut impl Write, values: &[f64]) -> Result<()> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    w.write_all(&bytes)?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4], format: &'static str) -> Result<()> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(format_err(format, format!("bad magic {m:?}")));
    }
    let version = read_u32(r)?;
    if version != VERSION {
        return Err(format_err(format, format!("unsupported version {version}")));
    }
    Ok(())
}

pub fn write_image(w: &mut impl Write, img: &Image) -> Result<()> {
    w.write_all(IMAGE_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(img.height() as u32).to_le_bytes())?;
    w.write_all(&(img.width() as u32).to_le_bytes())?;
    w.write_all(&(img.pixel_spacing_mm() as f32).to_le_bytes())?;
    write_f32s(w, img.values())
}

pub fn read_image(r: &mut impl Read) -> Result<Image> {
    read_header(r, IMAGE_MAGIC, "CTDI")?;
    let h = read_u32(r)? as usize;
    let w = read_u32(r)? as usize;
    let spacing = read_f32(r)? as f64;
    let values = read_f32s(r, h * w)?;
    Image::new(h, w, spacing, values)
}

pub fn save_image(path: &Path, img: &Image) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_image(&mut w, img)?;
    w.flush()?;
    Ok(())
}

pub fn load_image(path: &Path) -> Result<Image> {
    read_image(&mut BufReader::new(File::open(path)?))
}

pub fn write_sinogram(w: &mut impl Write, s: &Sinogram) -> Result<()> {
    let g = s.geometry();
    w.write_all(SINOGRAM_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(g.num_views() as u32).to_le_bytes())?;
    w.write_all(&(g.num_detectors() as u32).to_le_bytes())?;
    w.write_all(&(g.detector_spacing_mm() as f32).to_le_bytes())?;
    write_f32s(w, g.angles_deg())?;
    write_f32s(w, s.values())
}

/// Reads a `CTDS` sinogram.
///
/// The file does not record the image grid. When `grid` is `None` the
/// largest square grid whose standard detector count fits the stored
/// detector array is assumed, with pixel spacing equal to detector spacing.
pub fn read_sinogram(r: &mut impl Read, grid: Option<ImageGrid>) -> Result<Sinogram> {
    read_header(r, SINOGRAM_MAGIC, "CTDS")?;
    let views = read_u32(r)? as usize;
    let detectors = read_u32(r)? as usize;
    let spacing = read_f32(r)? as f64;
    let angles = read_f32s(r, views)?;
    let values = read_f32s(r, views * detectors)?;
    let grid = match grid {
        Some(g) => g,
        None => infer_square_grid(detectors, spacing)
            .ok_or_else(|| format_err("CTDS", "detector array too small for any grid"))?,
    };
    let geometry = Geometry::new(grid, angles, detectors, spacing, grid.center())?;
    Sinogram::new(geometry, values)
}

fn infer_square_grid(detectors: usize, spacing: f64) -> Option<ImageGrid> {
    let mut size = (detectors as f64 / std::f64::consts::SQRT_2).ceil() as usize + 1;
    while size > 0 {
        let grid = ImageGrid::square(size, spacing);
        if standard_detector_count(&grid) <= detectors {
            return Some(grid);
        }
        size -= 1;
    }
    None
}

pub fn save_sinogram(path: &Path, s: &Sinogram) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_sinogram(&mut w, s)?;
    w.flush()?;
    Ok(())
}

pub fn load_sinogram(path: &Path, grid: Option<ImageGrid>) -> Result<Sinogram> {
    read_sinogram(&mut BufReader::new(File::open(path)?), grid)
}
