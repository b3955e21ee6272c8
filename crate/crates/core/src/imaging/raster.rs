//! Pixel containers: RGB images, real-valued maps and binary masks.

use serde::{Deserialize, Serialize};

use super::geometry::BBox;
use super::ImagingError;

/// Row-major 8-bit RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl std::fmt::Debug for RasterImage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "RasterImage({}x{})", self.width, self.height)
    }
}

impl RasterImage {
    pub fn new(width: u32, height: u32, data: Vec<u8>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        let expected = width as usize * height as usize * 3;
        if data.len() != expected {
            return Err(ImagingError::InvalidInput(format!(
                "RGB buffer has {} bytes, expected {expected}",
                data.len()
            )));
        }
        Ok(Self { width, height, data })
    }

    /// Image filled with a single color.
    pub fn filled(width: u32, height: u32, rgb: [u8; 3]) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        let n = width as usize * height as usize;
        let mut data = Vec::with_capacity(n * 3);
        for _ in 0..n {
            data.extend_from_slice(&rgb);
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    /// Full-frame box `(0, 0, width, height)`.
    pub fn bounds(&self) -> BBox {
        BBox::new(0, 0, self.width, self.height).expect("image has positive dimensions")
    }

    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: u32, y: u32, rgb: [u8; 3]) {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Row-major real-valued map (attention maps, distance fields).
#[derive(Clone, Debug, PartialEq)]
pub struct GrayMap {
    width: u32,
    height: u32,
    data: Vec<f64>,
}

impl GrayMap {
    pub fn new(width: u32, height: u32, data: Vec<f64>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if data.len() != width as usize * height as usize {
            return Err(ImagingError::InvalidInput(format!(
                "map has {} values, expected {}",
                data.len(),
                width as usize * height as usize
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(ImagingError::InvalidInput(format!(
                "non-finite value at index {pos}"
            )));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: u32, height: u32) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![0.0; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: u32, y: u32) -> f64 {
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// Writes a value; the caller guarantees it is finite.
    pub(crate) fn set(&mut self, x: u32, y: u32, v: f64) {
        debug_assert!(v.is_finite());
        self.data[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }
}

/// Row-major binary mask.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl std::fmt::Debug for BitMask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "BitMask({}x{}, {} set)",
            self.width,
            self.height,
            self.count()
        )
    }
}

impl BitMask {
    pub fn new(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if bits.len() != width as usize * height as usize {
            return Err(ImagingError::InvalidInput(format!(
                "mask has {} bits, expected {}",
                bits.len(),
                width as usize * height as usize
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn empty(width: u32, height: u32) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![false; width as usize * height as usize])
    }

    pub fn full(width: u32, height: u32) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![true; width as usize * height as usize])
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    /// Bounds-checked lookup with signed coordinates; outside reads as unset.
    pub fn get_signed(&self, x: i64, y: i64) -> bool {
        x >= 0
            && y >= 0
            && (x as u64) < self.width as u64
            && (y as u64) < self.height as u64
            && self.get(x as u32, y as u32)
    }

    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|&b| b)
    }

    pub fn same_dims(&self, other: &BitMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    /// Pixel-wise OR. Panics on dimension mismatch.
    pub fn union(&self, other: &BitMask) -> BitMask {
        assert!(self.same_dims(other), "mask dimension mismatch");
        let bits = self
            .bits
            .iter()
            .zip(&other.bits)
            .map(|(a, b)| *a || *b)
            .collect();
        BitMask {
            width: self.width,
            height: self.height,
            bits,
        }
    }

    /// The sub-mask under `region`, which must lie inside the mask.
    pub fn crop(&self, region: &BBox) -> Result<BitMask, ImagingError> {
        if region.x1 > self.width || region.y1 > self.height {
            return Err(ImagingError::InvalidInput(format!(
                "crop {region} exceeds {}x{} mask",
                self.width, self.height
            )));
        }
        let w = self.width as usize;
        let bits = (region.y0 as usize..region.y1 as usize)
            .flat_map(|y| &self.bits[y * w + region.x0 as usize..y * w + region.x1 as usize])
            .copied()
            .collect();
        BitMask::new(region.width(), region.height(), bits)
    }

    /// True when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BitMask) -> bool {
        self.same_dims(other) && self.bits.iter().zip(&other.bits).all(|(a, b)| !*a || *b)
    }
}

fn check_dims(width: u32, height: u32) -> Result<(), ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::InvalidInput(format!(
            "dimensions must be positive, got {width}x{height}"
        )));
    }
    Ok(())
}

/// Integer pixel location `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: u32,
    pub y: u32,
}

impl Point {
    pub fn new(x: u32, y: u32) -> Self {
        Self { x, y }
    }

    /// Raster-order key `(y, x)`.
    pub fn raster_key(&self) -> (u32, u32) {
        (self.y, self.x)
    }
}
