//! 4-connected component labelling and distance-to-boundary fields.

use std::collections::VecDeque;

use super::distance::squared_edt;
use super::geometry::BBox;
use super::raster::{BitMask, Point};
use super::ImagingError;

/// A maximal 4-connected set of foreground pixels.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Component {
    /// 1-based, assigned in raster order of each component's first pixel.
    pub label: u32,
    /// Pixels in raster order.
    pub pixels: Vec<Point>,
}

impl Component {
    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn bbox(&self) -> BBox {
        let (mut x0, mut y0, mut x1, mut y1) = (u32::MAX, u32::MAX, 0, 0);
        for p in &self.pixels {
            x0 = x0.min(p.x);
            y0 = y0.min(p.y);
            x1 = x1.max(p.x + 1);
            y1 = y1.max(p.y + 1);
        }
        BBox { x0, y0, x1, y1 }
    }
}

/// Partition the set pixels into 4-connected components.
pub fn connected_components(mask: &BitMask) -> Vec<Component> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut labels = vec![0u32; w * h];
    let mut out = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if !mask.bits()[start] || labels[start] != 0 {
            continue;
        }
        let label = out.len() as u32 + 1;
        labels[start] = label;
        queue.push_back(start);
        let mut pixels = Vec::new();
        while let Some(i) = queue.pop_front() {
            let (x, y) = (i % w, i / w);
            pixels.push(Point::new(x as u32, y as u32));
            let mut visit = |j: usize| {
                if mask.bits()[j] && labels[j] == 0 {
                    labels[j] = label;
                    queue.push_back(j);
                }
            };
            if x > 0 {
                visit(i - 1);
            }
            if x + 1 < w {
                visit(i + 1);
            }
            if y > 0 {
                visit(i - w);
            }
            if y + 1 < h {
                visit(i + w);
            }
        }
        pixels.sort_unstable_by_key(Point::raster_key);
        out.push(Component { label, pixels });
    }
    out
}

/// Euclidean distance from each component pixel to the nearest pixel outside
/// the component. Pixels beyond `patch_bounds` count as outside, so every
/// value is at least 1. The result is aligned with `component.pixels`.
pub fn distance_to_boundary(component: &Component, patch_bounds: &BBox) -> Result<Vec<f64>, ImagingError> {
    if component.pixels.is_empty() {
        return Err(ImagingError::InvalidInput("empty component".into()));
    }
    let bb = component.bbox();
    if !patch_bounds.contains(&bb) {
        return Err(ImagingError::InvalidInput(format!(
            "component {bb} escapes patch {patch_bounds}"
        )));
    }
    // A one-pixel frame around the component box is all background, and the
    // nearest background pixel of any interior point never lies beyond it.
    let (w, h) = (bb.width() as usize + 2, bb.height() as usize + 2);
    let mut inside = vec![false; w * h];
    for p in &component.pixels {
        inside[(p.y - bb.y0 + 1) as usize * w + (p.x - bb.x0 + 1) as usize] = true;
    }
    let sq = squared_edt(w, h, |x, y| !inside[y * w + x]);
    Ok(component
        .pixels
        .iter()
        .map(|p| {
            let i = (p.y - bb.y0 + 1) as usize * w + (p.x - bb.x0 + 1) as usize;
            (sq[i] as f64).sqrt()
        })
        .collect())
}
