//! Binary morphology with flat-square and disk structuring elements.
//!
//! Pixels outside the image are background for every operation. Work is
//! restricted to the mask's bounding box grown by the element's reach.

use super::distance::squared_edt;
use super::geometry::{bbox_of_mask, BBox};
use super::raster::BitMask;
use super::ImagingError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructuringElement {
    /// `side × side` square centered on the origin; `side` is odd.
    FlatSquare { side: u32 },
    /// Integer offsets with `dx² + dy² ≤ radius²`.
    Disk { radius: u32 },
}

impl StructuringElement {
    pub fn flat(side: u32) -> Result<Self, ImagingError> {
        if side == 0 || side % 2 == 0 {
            return Err(ImagingError::InvalidInput(format!(
                "flat element side must be odd and >= 1, got {side}"
            )));
        }
        Ok(Self::FlatSquare { side })
    }

    pub fn disk(radius: u32) -> Self {
        Self::Disk { radius }
    }

    /// Chebyshev reach of the element from its origin.
    pub fn reach(&self) -> u32 {
        match *self {
            Self::FlatSquare { side } => side / 2,
            Self::Disk { radius } => radius,
        }
    }

    pub fn offsets(&self) -> Vec<(i64, i64)> {
        let r = self.reach() as i64;
        let mut out = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                let inside = match self {
                    Self::FlatSquare { .. } => true,
                    Self::Disk { .. } => dx * dx + dy * dy <= r * r,
                };
                if inside {
                    out.push((dx, dy));
                }
            }
        }
        out
    }

    fn validate(&self) -> Result<(), ImagingError> {
        match *self {
            Self::FlatSquare { side } => Self::flat(side).map(|_| ()),
            Self::Disk { .. } => Ok(()),
        }
    }
}

/// Set dilation, clipped at the image border.
pub fn dilate(mask: &BitMask, element: StructuringElement) -> Result<BitMask, ImagingError> {
    element.validate()?;
    let Ok(bb) = bbox_of_mask(mask) else {
        return Ok(mask.clone());
    };
    let reach = element.reach();
    if reach == 0 {
        return Ok(mask.clone());
    }
    let win = grow(&bb, reach, mask);
    let local = Window::extract(mask, win);
    let out = match element {
        StructuringElement::FlatSquare { .. } => {
            let rows = local.sweep_rows(reach, Op::Dilate);
            rows.sweep_cols(reach, Op::Dilate)
        }
        StructuringElement::Disk { radius } => {
            let r2 = radius as u64 * radius as u64;
            let sq = squared_edt(local.w, local.h, |x, y| local.bits[y * local.w + x]);
            Window {
                bits: sq.iter().map(|&d| d <= r2).collect(),
                ..local
            }
        }
    };
    Ok(out.paste_into(mask))
}

/// Set erosion with out-of-image pixels treated as background.
pub fn erode(mask: &BitMask, element: StructuringElement) -> Result<BitMask, ImagingError> {
    element.validate()?;
    let Ok(bb) = bbox_of_mask(mask) else {
        return Ok(mask.clone());
    };
    let reach = element.reach();
    if reach == 0 {
        return Ok(mask.clone());
    }
    // Erosion never grows the set, so the tight box is enough; everything
    // outside it is background.
    let local = Window::extract(mask, bb);
    let out = match element {
        StructuringElement::FlatSquare { .. } => {
            let rows = local.sweep_rows(reach, Op::Erode);
            rows.sweep_cols(reach, Op::Erode)
        }
        StructuringElement::Disk { radius } => {
            let r2 = radius as u64 * radius as u64;
            let sq = squared_edt(local.w + 2, local.h + 2, |x, y| {
                x == 0 || y == 0 || x > local.w || y > local.h || !local.bits[(y - 1) * local.w + x - 1]
            });
            let bits = (0..local.h)
                .flat_map(|y| (0..local.w).map(move |x| (x, y)))
                .map(|(x, y)| sq[(y + 1) * (local.w + 2) + x + 1] > r2)
                .collect();
            Window { bits, ..local }
        }
    };
    Ok(out.paste_into(&BitMask::empty(mask.width(), mask.height())?))
}

/// Morphological closing (dilation then erosion) with a flat square element.
pub fn close(mask: &BitMask, element: StructuringElement) -> Result<BitMask, ImagingError> {
    match element {
        StructuringElement::FlatSquare { .. } => erode(&dilate(mask, element)?, element),
        StructuringElement::Disk { .. } => Err(ImagingError::InvalidInput(
            "closing requires a flat square element".into(),
        )),
    }
}

fn grow(bb: &BBox, by: u32, mask: &BitMask) -> BBox {
    BBox::from_signed_clipped(
        bb.x0 as i64 - by as i64,
        bb.y0 as i64 - by as i64,
        bb.x1 as i64 + by as i64,
        bb.y1 as i64 + by as i64,
        &BBox {
            x0: 0,
            y0: 0,
            x1: mask.width(),
            y1: mask.height(),
        },
    )
    .expect("grown box overlaps the image")
}

#[derive(Clone, Copy)]
enum Op {
    Dilate,
    Erode,
}

/// Rectangular sub-grid of a mask.
struct Window {
    origin: BBox,
    w: usize,
    h: usize,
    bits: Vec<bool>,
}

impl Window {
    fn extract(mask: &BitMask, origin: BBox) -> Self {
        let (w, h) = (origin.width() as usize, origin.height() as usize);
        let mut bits = Vec::with_capacity(w * h);
        for y in origin.y0..origin.y1 {
            for x in origin.x0..origin.x1 {
                bits.push(mask.get(x, y));
            }
        }
        Self { origin, w, h, bits }
    }

    /// Overwrite the window region of `base` with this window's bits.
    fn paste_into(&self, base: &BitMask) -> BitMask {
        let mut out = base.clone();
        for y in 0..self.h {
            for x in 0..self.w {
                out.set(
                    self.origin.x0 + x as u32,
                    self.origin.y0 + y as u32,
                    self.bits[y * self.w + x],
                );
            }
        }
        out
    }

    fn sweep_rows(&self, reach: u32, op: Op) -> Window {
        let mut bits = vec![false; self.w * self.h];
        let mut line = Vec::with_capacity(self.w);
        for y in 0..self.h {
            line.clear();
            line.extend_from_slice(&self.bits[y * self.w..(y + 1) * self.w]);
            let swept = sweep_line(&line, reach as usize, op);
            bits[y * self.w..(y + 1) * self.w].copy_from_slice(&swept);
        }
        Window {
            origin: self.origin,
            w: self.w,
            h: self.h,
            bits,
        }
    }

    fn sweep_cols(&self, reach: u32, op: Op) -> Window {
        let mut bits = vec![false; self.w * self.h];
        let mut line = Vec::with_capacity(self.h);
        for x in 0..self.w {
            line.clear();
            line.extend((0..self.h).map(|y| self.bits[y * self.w + x]));
            let swept = sweep_line(&line, reach as usize, op);
            for (y, v) in swept.into_iter().enumerate() {
                bits[y * self.w + x] = v;
            }
        }
        Window {
            origin: self.origin,
            w: self.w,
            h: self.h,
            bits,
        }
    }
}

/// 1-D max (dilate) or min (erode) filter of half-width `reach`; cells past
/// either end count as unset.
fn sweep_line(line: &[bool], reach: usize, op: Op) -> Vec<bool> {
    let n = line.len();
    let mut prefix = vec![0usize; n + 1];
    for (i, &b) in line.iter().enumerate() {
        prefix[i + 1] = prefix[i] + b as usize;
    }
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(reach);
            let hi = (i + reach + 1).min(n);
            let count = prefix[hi] - prefix[lo];
            match op {
                Op::Dilate => count > 0,
                Op::Erode => count == 2 * reach + 1,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_element_must_be_odd() {
        assert!(StructuringElement::flat(4).is_err());
        assert!(StructuringElement::flat(0).is_err());
        assert!(close(
            &BitMask::empty(4, 4).unwrap(),
            StructuringElement::FlatSquare { side: 2 }
        )
        .is_err());
        assert!(close(&BitMask::empty(4, 4).unwrap(), StructuringElement::disk(2)).is_err());
    }

    #[test]
    fn empty_mask_stays_empty() {
        let m = BitMask::empty(9, 9).unwrap();
        assert!(close(&m, StructuringElement::flat(5).unwrap()).unwrap().is_empty());
        assert!(dilate(&m, StructuringElement::disk(3)).unwrap().is_empty());
    }

    #[test]
    fn disk_radius_zero_is_identity() {
        let mut m = BitMask::empty(9, 9).unwrap();
        m.set(3, 4, true);
        m.set(8, 8, true);
        assert_eq!(dilate(&m, StructuringElement::disk(0)).unwrap(), m);
    }

    #[test]
    fn disk_of_radius_two_has_thirteen_pixels() {
        let mut m = BitMask::empty(11, 11).unwrap();
        m.set(5, 5, true);
        let d = dilate(&m, StructuringElement::disk(2)).unwrap();
        assert_eq!(d.count(), 13);
        assert_eq!(StructuringElement::disk(2).offsets().len(), 13);
    }

    #[test]
    fn closing_fills_a_hole() {
        let mut m = BitMask::empty(40, 40).unwrap();
        for y in 10..30 {
            for x in 10..30 {
                m.set(x, y, true);
            }
        }
        let solid = m.clone();
        m.set(20, 20, false);
        let closed = close(&m, StructuringElement::flat(5).unwrap()).unwrap();
        assert_eq!(closed, solid);
        assert_eq!(close(&solid, StructuringElement::flat(5).unwrap()).unwrap(), solid);
    }

    #[test]
    fn disk_dilation_grows_box_by_radius() {
        let mut m = BitMask::empty(200, 200).unwrap();
        for y in 80..100 {
            for x in 70..120 {
                m.set(x, y, true);
            }
        }
        let d = dilate(&m, StructuringElement::disk(20)).unwrap();
        assert_eq!(bbox_of_mask(&d).unwrap(), BBox::new(50, 60, 140, 120).unwrap());
    }

    #[test]
    fn closing_erodes_against_the_image_border() {
        let m = BitMask::full(8, 8).unwrap();
        let c = close(&m, StructuringElement::flat(5).unwrap()).unwrap();
        assert!(!c.get(0, 0) && !c.get(1, 4));
        assert!(c.get(2, 2) && c.get(5, 5));
    }
}
