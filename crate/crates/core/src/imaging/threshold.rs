//! Otsu thresholding over a 256-bin histogram of min-max scaled values.

use super::raster::{BitMask, GrayMap};
use super::ImagingError;

pub const OTSU_BINS: usize = 256;

/// Histogram bin of `v` after scaling `[lo, hi]` onto `[0, 256)`.
#[inline]
pub fn histogram_bin(v: f64, lo: f64, hi: f64) -> usize {
    let s = (v - lo) / (hi - lo);
    // `v >= lo`, so truncation is the floor.
    ((s * OTSU_BINS as f64) as usize).min(OTSU_BINS - 1)
}

/// Split index `t` (class 0 = bins `0..=t`) maximizing between-class
/// variance. Ties go to the lowest index. `None` when fewer than two bins are
/// populated.
pub fn otsu_bin(hist: &[u64; OTSU_BINS]) -> Option<usize> {
    let total: u64 = hist.iter().sum();
    let total_sum: u64 = hist.iter().enumerate().map(|(i, &h)| i as u64 * h).sum();
    let mut w0 = 0u64;
    let mut s0 = 0u64;
    let mut best: Option<(usize, f64)> = None;
    for (t, &h) in hist.iter().enumerate().take(OTSU_BINS - 1) {
        w0 += h;
        s0 += t as u64 * h;
        let w1 = total - w0;
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let s1 = total_sum - s0;
        let var = between_class_variance(w0, s0, w1, s1);
        if best.map_or(true, |(_, b)| var > b) {
            best = Some((t, var));
        }
    }
    best.map(|(t, _)| t)
}

/// `w0·w1·(μ0 − μ1)²` written over exact integer moments.
#[inline]
fn between_class_variance(w0: u64, s0: u64, w1: u64, s1: u64) -> f64 {
    let num = w1 as f64 * s0 as f64 - w0 as f64 * s1 as f64;
    num * num / (w0 as f64 * w1 as f64)
}

/// Otsu threshold of a real-valued map.
///
/// The returned value is the smallest sample that falls above the optimal
/// split, so `binarize(map, t)` selects exactly the upper class. A constant
/// map returns its value.
pub fn otsu_threshold(map: &GrayMap) -> Result<f64, ImagingError> {
    let (lo, hi) = map.min_max();
    if !lo.is_finite() || !hi.is_finite() {
        return Err(ImagingError::InvalidInput("map contains non-finite values".into()));
    }
    if lo == hi {
        return Ok(lo);
    }
    let mut hist = [0u64; OTSU_BINS];
    let mut bin_min = [f64::INFINITY; OTSU_BINS];
    for &v in map.data() {
        let b = histogram_bin(v, lo, hi);
        hist[b] += 1;
        bin_min[b] = bin_min[b].min(v);
    }
    // At least the min and max bins are populated, so a split exists.
    let t = otsu_bin(&hist).expect("two populated bins");
    let threshold = bin_min[t + 1..].iter().copied().fold(f64::INFINITY, f64::min);
    Ok(threshold)
}

/// `1` where the value is at or above the threshold.
pub fn binarize(map: &GrayMap, threshold: f64) -> BitMask {
    let bits = map.data().iter().map(|&v| v >= threshold).collect();
    BitMask::new(map.width(), map.height(), bits).expect("dimensions come from a valid map")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_class_map_splits_cleanly() {
        let data: Vec<f64> = (0..16).map(|i| if i % 2 == 0 { 0.0 } else { 1.0 }).collect();
        let map = GrayMap::new(4, 4, data.clone()).unwrap();
        let t = otsu_threshold(&map).unwrap();
        assert!(t > 0.0 && t <= 1.0);
        let mask = binarize(&map, t);
        for (bit, v) in mask.bits().iter().zip(&data) {
            assert_eq!(*bit, *v == 1.0);
        }
    }

    #[test]
    fn constant_map_returns_constant() {
        let map = GrayMap::new(3, 3, vec![0.5; 9]).unwrap();
        let t = otsu_threshold(&map).unwrap();
        assert_eq!(t, 0.5);
        assert_eq!(binarize(&map, t).count(), 9);
    }

    #[test]
    fn binarize_extremes() {
        let map = GrayMap::new(2, 2, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        assert!(binarize(&map, 0.5).is_empty());
        assert_eq!(binarize(&map, f64::NEG_INFINITY).count(), 4);
    }

    #[test]
    fn split_prefers_lowest_index_on_ties() {
        let mut hist = [0u64; OTSU_BINS];
        hist[0] = 5;
        hist[255] = 5;
        assert_eq!(otsu_bin(&hist), Some(0));
        let mut single = [0u64; OTSU_BINS];
        single[7] = 3;
        assert_eq!(otsu_bin(&single), None);
    }
}
