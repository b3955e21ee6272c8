//! Run traces drawn over the input image.

use crate::imaging::io::draw_box;
use crate::imaging::RasterImage;
use crate::reasoning::RunTrace;

pub const EVIDENCE_RGB: [u8; 3] = [0, 200, 0];
pub const VIEW_RGB: [u8; 3] = [30, 90, 255];
pub const GROUNDING_RGB: [u8; 3] = [230, 20, 20];

/// Evidence boxes in green, the chosen view in blue, the grounding box in
/// red. Works on a copy; the trace is only read.
pub fn render_overlay(image: &RasterImage, trace: &RunTrace) -> RasterImage {
    let mut out = image.clone();
    let thick = (image.width().max(image.height()) / 512).max(1) + 1;
    if let Some(m) = &trace.memory {
        for b in &m.fine {
            draw_box(&mut out, b, EVIDENCE_RGB, thick);
        }
        if !m.fine.is_empty() {
            draw_box(&mut out, &m.coarse, VIEW_RGB, thick);
        }
    }
    if let Some(g) = &trace.grounding {
        draw_box(&mut out, g, GROUNDING_RGB, thick);
    }
    out
}
