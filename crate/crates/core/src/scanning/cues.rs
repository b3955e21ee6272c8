//! Patch partition and cue exploration on attention maps.

use serde::{Deserialize, Serialize};

use super::{Patch, Proxy};
use crate::config::{ProxyRule, ScanConfig};
use crate::imaging::{
    binarize, connected_components, crop, distance_to_boundary, otsu_threshold, BBox, Component,
    GrayMap, ImagingError, Point, RasterImage,
};

/// Tile edges along one axis: steps of `l`, with a remainder thinner than
/// `min_tile` folded into the previous tile.
fn axis_edges(extent: u32, l: u32, min_tile: u32) -> Vec<u32> {
    let mut edges = vec![0];
    let mut pos = 0;
    while pos < extent {
        pos = (pos + l).min(extent);
        edges.push(pos);
    }
    let n = edges.len();
    if n > 2 && edges[n - 1] - edges[n - 2] < min_tile {
        edges.remove(n - 2);
    }
    edges
}

/// Tile boxes covering a `width × height` image, raster order.
pub fn partition_boxes(width: u32, height: u32, l: u32, min_tile: u32) -> Vec<BBox> {
    assert!(l >= 1, "tile size must be positive");
    let xs = axis_edges(width, l, min_tile);
    let ys = axis_edges(height, l, min_tile);
    let mut out = Vec::with_capacity((xs.len() - 1) * (ys.len() - 1));
    for yw in ys.windows(2) {
        for xw in xs.windows(2) {
            out.push(BBox {
                x0: xw[0],
                y0: yw[0],
                x1: xw[1],
                y1: yw[1],
            });
        }
    }
    out
}

pub fn partition(image: &RasterImage, l: u32, min_tile: u32) -> Vec<Patch> {
    partition_boxes(image.width(), image.height(), l, min_tile)
        .into_iter()
        .map(|b| Patch {
            pixels: crop(image, &b).expect("tiles lie inside the image"),
            bounds: b,
        })
        .collect()
}

/// Counts for one patch's cue exploration.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CueStats {
    pub threshold: Option<f64>,
    pub components: usize,
    /// Components at or above the area threshold.
    pub kept: usize,
}

/// Proxies from an attention map over a patch whose top-left corner sits at
/// `origin` in image coordinates.
pub fn cues_from_map(
    map: &GrayMap,
    origin: (u32, u32),
    patch_index: usize,
    cfg: &ScanConfig,
) -> Result<(Vec<Proxy>, CueStats), ImagingError> {
    let (lo, hi) = map.min_max();
    let mut stats = CueStats::default();
    if hi <= 0.0 && lo >= 0.0 {
        return Ok((Vec::new(), stats));
    }
    let t = otsu_threshold(map)?;
    stats.threshold = Some(t);
    let fg = binarize(map, t);
    let comps = connected_components(&fg);
    stats.components = comps.len();
    let bounds = BBox {
        x0: 0,
        y0: 0,
        x1: map.width(),
        y1: map.height(),
    };
    let norm_s = |v: f64| if hi > lo { (v - lo) / (hi - lo) } else { 1.0 };
    let mut proxies = Vec::new();
    for comp in comps.iter().filter(|c| c.area() >= cfg.tau_area as usize) {
        stats.kept += 1;
        if let Some((p, score)) = pick_proxy(map, comp, &bounds, cfg.proxy_rule, &norm_s)? {
            proxies.push(Proxy {
                point: Point::new(p.x + origin.0, p.y + origin.1),
                score,
                source_patch: patch_index,
            });
        }
    }
    Ok((proxies, stats))
}

fn min_max_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi > lo {
        values.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![1.0; values.len()]
    }
}

/// First maximum in raster order, i.e. ties go to the smallest (y, x).
fn argmax(pixels: &[Point], scores: impl Iterator<Item = f64>) -> Option<(Point, f64)> {
    let mut best: Option<(Point, f64)> = None;
    for (p, s) in pixels.iter().zip(scores) {
        if best.is_none_or(|(_, b)| s > b) {
            best = Some((*p, s));
        }
    }
    best
}

fn pick_proxy(
    map: &GrayMap,
    comp: &Component,
    bounds: &BBox,
    rule: ProxyRule,
    norm_s: &impl Fn(f64) -> f64,
) -> Result<Option<(Point, f64)>, ImagingError> {
    let s_tilde: Vec<f64> = comp.pixels.iter().map(|p| norm_s(map.get(p.x, p.y))).collect();
    let chosen = match rule {
        ProxyRule::Combined => {
            let d_tilde = min_max_normalize(&distance_to_boundary(comp, bounds)?);
            argmax(&comp.pixels, s_tilde.iter().zip(&d_tilde).map(|(s, d)| s * d))
        }
        ProxyRule::ChebyshevCenter => {
            let d_tilde = min_max_normalize(&distance_to_boundary(comp, bounds)?);
            // Rank by distance, report attention so scores stay comparable
            // across cues.
            argmax(&comp.pixels, d_tilde.iter().copied())
                .map(|(p, _)| (p, norm_s(map.get(p.x, p.y))))
        }
        ProxyRule::AttentionPeak => argmax(&comp.pixels, s_tilde.iter().copied()),
        ProxyRule::Centroid => {
            let n = comp.area() as u64;
            let sx: u64 = comp.pixels.iter().map(|p| p.x as u64).sum();
            let sy: u64 = comp.pixels.iter().map(|p| p.y as u64).sum();
            // Round half up, in integers.
            let c = Point::new(((2 * sx + n) / (2 * n)) as u32, ((2 * sy + n) / (2 * n)) as u32);
            let peak = s_tilde.iter().copied().fold(0.0, f64::max);
            Some((c, peak))
        }
    };
    Ok(chosen.filter(|(_, s)| *s > 0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tiling_examples() {
        assert_eq!(partition_boxes(1152, 1152, 576, 32).len(), 4);
        assert_eq!(
            partition_boxes(600, 576, 576, 32),
            vec![BBox::new(0, 0, 600, 576).unwrap()]
        );
        assert_eq!(
            partition_boxes(300, 200, 576, 32),
            vec![BBox::new(0, 0, 300, 200).unwrap()]
        );
        let t = partition_boxes(1024, 1024, 576, 32);
        assert_eq!(t.len(), 4);
        assert_eq!(t[3], BBox::new(576, 576, 1024, 1024).unwrap());
    }

    #[test]
    fn tiles_cover_exactly() {
        for (w, h, l) in [(1000, 777, 576), (33, 65, 32), (10, 10, 3), (1, 1, 5)] {
            let tiles = partition_boxes(w, h, l, 32);
            let total: u64 = tiles.iter().map(|b| b.area()).sum();
            assert_eq!(total, w as u64 * h as u64);
        }
    }

    fn disk_map(w: u32, h: u32, cx: i64, cy: i64, r: i64) -> GrayMap {
        let mut data = Vec::new();
        for y in 0..h as i64 {
            for x in 0..w as i64 {
                let inside = (x - cx).pow(2) + (y - cy).pow(2) <= r * r;
                data.push(if inside { 1.0 } else { 0.0 });
            }
        }
        GrayMap::new(w, h, data).unwrap()
    }

    #[test]
    fn uniform_disk_proxy_at_center() {
        let map = disk_map(64, 64, 30, 20, 8);
        let (proxies, stats) = cues_from_map(&map, (100, 200), 3, &ScanConfig::default()).unwrap();
        assert_eq!(stats.kept, 1);
        assert_eq!(proxies.len(), 1);
        assert_eq!(proxies[0].point, Point::new(130, 220));
        assert_eq!(proxies[0].source_patch, 3);
        assert!(proxies[0].score > 0.0);
    }

    #[test]
    fn zero_map_and_small_cues() {
        let zero = GrayMap::zeros(32, 32).unwrap();
        assert!(cues_from_map(&zero, (0, 0), 0, &ScanConfig::default()).unwrap().0.is_empty());
        // 7×7 = 49 pixels, below the default area threshold.
        let mut data = vec![0.0; 32 * 32];
        for y in 5..12 {
            for x in 5..12 {
                data[y * 32 + x] = 1.0;
            }
        }
        let map = GrayMap::new(32, 32, data).unwrap();
        let (p, stats) = cues_from_map(&map, (0, 0), 0, &ScanConfig::default()).unwrap();
        assert!(p.is_empty());
        assert_eq!((stats.components, stats.kept), (1, 0));
    }
}
