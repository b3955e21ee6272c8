//! Evidence extraction: greedy segmentation of proxies over a visited mask.

use serde::{Deserialize, Serialize};

use super::{EvidenceItem, Proxy};
use crate::config::ScanConfig;
use crate::experts::{ExpertError, ExpertSession, ImageRef};
use crate::imaging::{
    bbox_of_mask, pad_bbox, close, crop, dilate, iou, BBox, BitMask, RasterImage,
    StructuringElement,
};

/// What happened to one proxy during extraction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum ExtractionStep {
    /// Segmented and appended as candidate `index`.
    Kept { proxy: Proxy, index: usize, bbox: BBox },
    /// Segmented, but overlapped candidate `overlaps` above the IoU limit.
    Duplicate { proxy: Proxy, bbox: BBox, overlaps: usize, iou: f64 },
    /// The segmenter returned nothing at the proxy.
    EmptyMask { proxy: Proxy },
    /// Covered by an earlier grown mask; never segmented.
    Dropped { proxy: Proxy },
}

/// Sort proxies by descending score, ties by (y, x).
pub fn order_proxies(proxies: &mut [Proxy]) {
    proxies.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.point.raster_key().cmp(&b.point.raster_key()))
    });
}

/// Closing then disk dilation. The raw mask is unioned back in before
/// dilating because closing erodes against the image border, and the grown
/// mask must contain the raw one.
pub fn grow_mask(mask: &BitMask, cfg: &ScanConfig) -> Result<BitMask, ExpertError> {
    if !cfg.post_process {
        return Ok(mask.clone());
    }
    let closed = close(mask, StructuringElement::flat(cfg.close_kernel)?)?;
    Ok(dilate(&closed.union(mask), StructuringElement::disk(cfg.dilate_radius))?)
}

/// How far [`grow_mask`] can move a mask boundary.
pub fn grow_margin(cfg: &ScanConfig) -> u32 {
    if cfg.post_process {
        cfg.close_kernel / 2 + cfg.dilate_radius
    } else {
        0
    }
}

/// Fill for pixels already claimed by a grown mask.
const VISITED_RGB: [u8; 3] = [0, 0, 0];

pub struct Extraction {
    /// All candidates in discovery order.
    pub candidates: Vec<EvidenceItem>,
    pub visited: BitMask,
    pub steps: Vec<ExtractionStep>,
}

pub fn extract_evidence(
    session: &ExpertSession,
    image: &RasterImage,
    mut proxies: Vec<Proxy>,
    cfg: &ScanConfig,
) -> Result<Extraction, ExpertError> {
    order_proxies(&mut proxies);
    let bounds = image.bounds();
    let mut working = image.clone();
    let mut visited = BitMask::empty(image.width(), image.height())?;
    let mut candidates: Vec<EvidenceItem> = Vec::new();
    let mut steps = Vec::with_capacity(proxies.len());
    let mut alive = vec![true; proxies.len()];

    for i in 0..proxies.len() {
        let proxy = proxies[i].clone();
        if !alive[i] {
            steps.push(ExtractionStep::Dropped { proxy });
            continue;
        }
        let mask = session.segment(ImageRef::at(&working, bounds), proxy.point)?;
        let Ok(object_bbox) = bbox_of_mask(&mask) else {
            log::debug!("empty mask at proxy ({}, {})", proxy.point.x, proxy.point.y);
            steps.push(ExtractionStep::EmptyMask { proxy });
            continue;
        };
        // Growing never reaches past this window, so working inside it
        // gives the same mask as working on the whole image.
        let win = pad_bbox(&object_bbox, grow_margin(cfg), &bounds)?;
        let local = mask.crop(&win)?;
        let grown = grow_mask(&local, cfg)?;
        let bbox = bbox_of_mask(&grown)?.offset(win.x0, win.y0);

        let worst = candidates
            .iter()
            .enumerate()
            .map(|(j, c)| (j, iou(&bbox, &c.bbox)))
            .find(|(_, v)| *v > cfg.theta_iou);
        match worst {
            None => {
                let index = candidates.len();
                candidates.push(EvidenceItem {
                    bbox,
                    object_bbox,
                    crop: crop(image, &bbox)?,
                    mask_area: local.count() as u64,
                    affirmed: false,
                    discovery: index,
                    proxy: proxy.clone(),
                });
                steps.push(ExtractionStep::Kept { proxy, index, bbox });
            }
            Some((overlaps, v)) => steps.push(ExtractionStep::Duplicate {
                proxy,
                bbox,
                overlaps,
                iou: v,
            }),
        }

        let in_grown = |x: u32, y: u32| win.contains_point(x, y) && grown.get(x - win.x0, y - win.y0);
        for y in win.y0..win.y1 {
            for x in win.x0..win.x1 {
                if in_grown(x, y) {
                    working.set_pixel(x, y, VISITED_RGB);
                    visited.set(x, y, true);
                }
            }
        }
        for (j, p) in proxies.iter().enumerate().skip(i + 1) {
            if alive[j] && in_grown(p.point.x, p.point.y) {
                alive[j] = false;
            }
        }
    }
    Ok(Extraction {
        candidates,
        visited,
        steps,
    })
}

/// The `k` smallest candidates by box area; equal areas keep discovery
/// order.
pub fn take_k_smallest(mut items: Vec<EvidenceItem>, k: crate::config::TopK) -> Vec<EvidenceItem> {
    items.sort_by_key(|it| (it.bbox.area(), it.discovery));
    let n = k.limit(items.len());
    items.truncate(n);
    items
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn windowed_growth_matches_full_frame(
            w in 8u32..90, h in 8u32..90,
            rects in prop::collection::vec((0u32..90, 0u32..90, 1u32..12, 1u32..12), 1..4),
            kernel in 0u32..3, radius in 0u32..12,
        ) {
            let cfg = ScanConfig { close_kernel: 2 * kernel + 1, dilate_radius: radius, ..ScanConfig::default() };
            let mut mask = BitMask::empty(w, h).unwrap();
            for (x, y, rw, rh) in rects {
                for yy in y.min(h - 1)..(y + rh).min(h) {
                    for xx in x.min(w - 1)..(x + rw).min(w) {
                        mask.set(xx, yy, true);
                    }
                }
            }
            let full = grow_mask(&mask, &cfg).unwrap();
            let win = pad_bbox(&bbox_of_mask(&mask).unwrap(), grow_margin(&cfg), &full_bounds(&mask)).unwrap();
            prop_assert_eq!(grow_mask(&mask.crop(&win).unwrap(), &cfg).unwrap(), full.crop(&win).unwrap());
            prop_assert_eq!(full.count(), full.crop(&win).unwrap().count());
        }
    }

    fn full_bounds(m: &BitMask) -> BBox {
        BBox::new(0, 0, m.width(), m.height()).unwrap()
    }

    #[test]
    fn smallest_first_with_discovery_ties() {
        let img = RasterImage::filled(50, 50, [1, 1, 1]).unwrap();
        let item = |i: usize, side: u32| {
            let bbox = BBox::new(0, 0, side, side).unwrap();
            EvidenceItem {
                bbox,
                object_bbox: bbox,
                crop: crop(&img, &bbox).unwrap(),
                mask_area: 1,
                affirmed: false,
                discovery: i,
                proxy: Proxy {
                    point: crate::imaging::Point::new(0, 0),
                    score: 1.0,
                    source_patch: 0,
                },
            }
        };
        let items = vec![item(0, 9), item(1, 4), item(2, 9), item(3, 4)];
        let order: Vec<usize> = take_k_smallest(items.clone(), crate::config::TopK(None))
            .iter()
            .map(|e| e.discovery)
            .collect();
        assert_eq!(order, [1, 3, 0, 2]);
        assert_eq!(take_k_smallest(items, crate::config::TopK(Some(3))).len(), 3);
    }
}
