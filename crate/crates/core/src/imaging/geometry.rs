//! Half-open integer boxes and the box/crop utilities built on them.

use serde::{Deserialize, Serialize};

use super::raster::{BitMask, RasterImage};
use super::ImagingError;

/// Axis-aligned half-open pixel rectangle `[x0, x1) × [y0, y1)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x0: u32,
    pub y0: u32,
    pub x1: u32,
    pub y1: u32,
}

impl BBox {
    pub fn new(x0: u32, y0: u32, x1: u32, y1: u32) -> Result<Self, ImagingError> {
        if x0 >= x1 || y0 >= y1 {
            return Err(ImagingError::InvalidInput(format!(
                "degenerate box ({x0},{y0},{x1},{y1})"
            )));
        }
        Ok(Self { x0, y0, x1, y1 })
    }

    /// Box from signed bounds clipped to `bounds`; `None` when the clip is empty.
    pub fn from_signed_clipped(x0: i64, y0: i64, x1: i64, y1: i64, bounds: &BBox) -> Option<Self> {
        let cx0 = x0.max(bounds.x0 as i64);
        let cy0 = y0.max(bounds.y0 as i64);
        let cx1 = x1.min(bounds.x1 as i64);
        let cy1 = y1.min(bounds.y1 as i64);
        (cx0 < cx1 && cy0 < cy1).then(|| Self {
            x0: cx0 as u32,
            y0: cy0 as u32,
            x1: cx1 as u32,
            y1: cy1 as u32,
        })
    }

    pub fn width(&self) -> u32 {
        self.x1 - self.x0
    }

    pub fn height(&self) -> u32 {
        self.y1 - self.y0
    }

    pub fn area(&self) -> u64 {
        self.width() as u64 * self.height() as u64
    }

    pub fn contains_point(&self, x: u32, y: u32) -> bool {
        x >= self.x0 && x < self.x1 && y >= self.y0 && y < self.y1
    }

    pub fn contains(&self, other: &BBox) -> bool {
        other.x0 >= self.x0 && other.y0 >= self.y0 && other.x1 <= self.x1 && other.y1 <= self.y1
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let x0 = self.x0.max(other.x0);
        let y0 = self.y0.max(other.y0);
        let x1 = self.x1.min(other.x1);
        let y1 = self.y1.min(other.y1);
        (x0 < x1 && y0 < y1).then_some(BBox { x0, y0, x1, y1 })
    }

    /// Smallest box covering both.
    pub fn hull(&self, other: &BBox) -> BBox {
        BBox {
            x0: self.x0.min(other.x0),
            y0: self.y0.min(other.y0),
            x1: self.x1.max(other.x1),
            y1: self.y1.max(other.y1),
        }
    }

    /// Shift by a non-negative offset (local → parent coordinates).
    pub fn offset(&self, dx: u32, dy: u32) -> BBox {
        BBox {
            x0: self.x0 + dx,
            y0: self.y0 + dy,
            x1: self.x1 + dx,
            y1: self.y1 + dy,
        }
    }

    /// Express this box relative to `origin`'s top-left corner. The box must
    /// lie inside `origin`.
    pub fn relative_to(&self, origin: &BBox) -> BBox {
        debug_assert!(origin.contains(self));
        BBox {
            x0: self.x0 - origin.x0,
            y0: self.y0 - origin.y0,
            x1: self.x1 - origin.x0,
            y1: self.y1 - origin.y0,
        }
    }

    pub fn as_array(&self) -> [u32; 4] {
        [self.x0, self.y0, self.x1, self.y1]
    }
}

impl std::fmt::Display for BBox {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "({},{},{},{})", self.x0, self.y0, self.x1, self.y1)
    }
}

/// Intersection over union.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersect(b).map_or(0, |r| r.area());
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

/// Scale a box isotropically about its center by `s ≥ 1`, rounding outward to
/// whole pixels, then clip to `bounds`. The result always contains `b` when
/// `b` lies inside `bounds`.
pub fn scale_bbox(b: &BBox, s: f64, bounds: &BBox) -> Result<BBox, ImagingError> {
    if !(s >= 1.0) || !s.is_finite() {
        return Err(ImagingError::InvalidInput(format!(
            "scale must be a finite value >= 1, got {s}"
        )));
    }
    // Work in doubled coordinates so the center stays exact.
    let cx2 = b.x0 as f64 + b.x1 as f64;
    let cy2 = b.y0 as f64 + b.y1 as f64;
    let w = b.width() as f64 * s;
    let h = b.height() as f64 * s;
    let x0 = ((cx2 - w) / 2.0).floor() as i64;
    let x1 = ((cx2 + w) / 2.0).ceil() as i64;
    let y0 = ((cy2 - h) / 2.0).floor() as i64;
    let y1 = ((cy2 + h) / 2.0).ceil() as i64;
    let x0 = x0.min(b.x0 as i64);
    let y0 = y0.min(b.y0 as i64);
    let x1 = x1.max(b.x1 as i64);
    let y1 = y1.max(b.y1 as i64);
    BBox::from_signed_clipped(x0, y0, x1, y1, bounds)
        .ok_or_else(|| ImagingError::InvalidInput(format!("box {b} lies outside bounds {bounds}")))
}

/// True when scaling `b` by `s` needs no clipping against `bounds`.
pub fn scale_fits(b: &BBox, s: f64, bounds: &BBox) -> bool {
    let cx2 = b.x0 as f64 + b.x1 as f64;
    let cy2 = b.y0 as f64 + b.y1 as f64;
    let w = b.width() as f64 * s;
    let h = b.height() as f64 * s;
    ((cx2 - w) / 2.0).floor() >= bounds.x0 as f64
        && ((cy2 - h) / 2.0).floor() >= bounds.y0 as f64
        && ((cx2 + w) / 2.0).ceil() <= bounds.x1 as f64
        && ((cy2 + h) / 2.0).ceil() <= bounds.y1 as f64
}

/// Smallest box covering every input box.
pub fn union_bbox(boxes: &[BBox]) -> Result<BBox, ImagingError> {
    let (first, rest) = boxes
        .split_first()
        .ok_or_else(|| ImagingError::InvalidInput("union of zero boxes".into()))?;
    Ok(rest.iter().fold(*first, |acc, b| acc.hull(b)))
}

/// Grow a box by `pad` pixels on every side, clipped to `bounds`.
pub fn pad_bbox(b: &BBox, pad: u32, bounds: &BBox) -> Result<BBox, ImagingError> {
    let p = pad as i64;
    BBox::from_signed_clipped(
        b.x0 as i64 - p,
        b.y0 as i64 - p,
        b.x1 as i64 + p,
        b.y1 as i64 + p,
        bounds,
    )
    .ok_or_else(|| ImagingError::InvalidInput(format!("box {b} lies outside bounds {bounds}")))
}

/// Copy the pixels under `b`.
pub fn crop(img: &RasterImage, b: &BBox) -> Result<RasterImage, ImagingError> {
    if !img.bounds().contains(b) {
        return Err(ImagingError::InvalidInput(format!(
            "crop box {b} exceeds image {}x{}",
            img.width(),
            img.height()
        )));
    }
    let row = img.width() as usize * 3;
    let mut data = Vec::with_capacity(b.area() as usize * 3);
    for y in b.y0..b.y1 {
        let start = y as usize * row + b.x0 as usize * 3;
        data.extend_from_slice(&img.data()[start..start + b.width() as usize * 3]);
    }
    RasterImage::new(b.width(), b.height(), data)
}

/// Tight box around the set pixels.
pub fn bbox_of_mask(mask: &BitMask) -> Result<BBox, ImagingError> {
    let w = mask.width() as usize;
    let (mut x0, mut x1) = (usize::MAX, 0usize);
    let (mut y0, mut y1) = (None, 0usize);
    for (y, row) in mask.bits().chunks_exact(w).enumerate() {
        let Some(first) = row.iter().position(|&b| b) else {
            continue;
        };
        let last = row.iter().rposition(|&b| b).unwrap_or(first);
        y0.get_or_insert(y);
        y1 = y + 1;
        x0 = x0.min(first);
        x1 = x1.max(last + 1);
    }
    let y0 = y0.ok_or(ImagingError::EmptyMask)?;
    Ok(BBox {
        x0: x0 as u32,
        y0: y0 as u32,
        x1: x1 as u32,
        y1: y1 as u32,
    })
}

/// Zero all three channels wherever the mask is set.
pub fn apply_visited(img: &RasterImage, mask: &BitMask) -> Result<RasterImage, ImagingError> {
    if img.width() != mask.width() || img.height() != mask.height() {
        return Err(ImagingError::InvalidInput(
            "visited mask does not match image dimensions".into(),
        ));
    }
    let mut out = img.clone();
    for y in 0..mask.height() {
        for x in 0..mask.width() {
            if mask.get(x, y) {
                out.set_pixel(x, y, [0, 0, 0]);
            }
        }
    }
    Ok(out)
}
