//! Brute-force reference implementations, written straight from the
//! definitions and sharing no code with the library.

#![allow(dead_code)]

use deepscan::imaging::{BBox, BitMask, GrayMap, Point};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Otsu over 256 min-max bins with exact integer scoring. Returns the
/// smallest value in a bin above the best split, or the value of a
/// constant map.
pub fn otsu_oracle(values: &[f64]) -> f64 {
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if lo == hi {
        return lo;
    }
    let bin = |v: f64| (((v - lo) / (hi - lo) * 256.0).floor() as usize).min(255);
    let mut hist = [0u128; 256];
    for &v in values {
        hist[bin(v)] += 1;
    }
    // Between-class variance w0·w1·(μ0−μ1)² = (w1·s0 − w0·s1)² / (w0·w1),
    // compared by cross-multiplication so there is no rounding.
    let mut best: Option<(usize, u128, u128)> = None;
    for t in 0..255 {
        let (mut w0, mut s0, mut w1, mut s1) = (0u128, 0u128, 0u128, 0u128);
        for (i, &h) in hist.iter().enumerate() {
            if i <= t {
                w0 += h;
                s0 += i as u128 * h;
            } else {
                w1 += h;
                s1 += i as u128 * h;
            }
        }
        if w0 == 0 || w1 == 0 {
            continue;
        }
        let d = (w1 * s0).abs_diff(w0 * s1);
        let (num, den) = (d * d, w0 * w1);
        let better = match best {
            None => true,
            Some((_, bn, bd)) => num * bd > bn * den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    let t = best.expect("two populated bins").0;
    values
        .iter()
        .copied()
        .filter(|&v| bin(v) > t)
        .fold(f64::INFINITY, f64::min)
}

/// 4-connected components by union-find, each as sorted raster-order
/// pixels, ordered by first pixel.
pub fn components_oracle(mask: &BitMask) -> Vec<Vec<(u32, u32)>> {
    let (w, h) = (mask.width() as usize, mask.height() as usize);
    let mut parent: Vec<usize> = (0..w * h).collect();
    fn find(p: &mut [usize], mut i: usize) -> usize {
        while p[i] != i {
            p[i] = p[p[i]];
            i = p[i];
        }
        i
    }
    let set = |x: usize, y: usize| mask.get(x as u32, y as u32);
    for y in 0..h {
        for x in 0..w {
            if !set(x, y) {
                continue;
            }
            for (nx, ny) in [(x + 1, y), (x, y + 1)] {
                if nx < w && ny < h && set(nx, ny) {
                    let (a, b) = (find(&mut parent, y * w + x), find(&mut parent, ny * w + nx));
                    parent[a.max(b)] = a.min(b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<(u32, u32)>> = Default::default();
    for y in 0..h {
        for x in 0..w {
            if set(x, y) {
                let r = find(&mut parent, y * w + x);
                groups.entry(r).or_default().push((x as u32, y as u32));
            }
        }
    }
    let mut out: Vec<Vec<(u32, u32)>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_by_key(|&(x, y)| (y, x));
    }
    out.sort_by_key(|g| (g[0].1, g[0].0));
    out
}

/// Distance from each pixel to the nearest pixel not in `pixels`, scanning
/// every candidate in a frame one pixel wider than the pixel set.
pub fn boundary_distance_oracle(pixels: &[Point]) -> Vec<f64> {
    let inside: std::collections::HashSet<(i64, i64)> = pixels.iter().map(|p| (p.x as i64, p.y as i64)).collect();
    let x0 = pixels.iter().map(|p| p.x as i64).min().unwrap() - 1;
    let x1 = pixels.iter().map(|p| p.x as i64).max().unwrap() + 1;
    let y0 = pixels.iter().map(|p| p.y as i64).min().unwrap() - 1;
    let y1 = pixels.iter().map(|p| p.y as i64).max().unwrap() + 1;
    pixels
        .iter()
        .map(|p| {
            let mut best = i64::MAX;
            for y in y0..=y1 {
                for x in x0..=x1 {
                    if !inside.contains(&(x, y)) {
                        let (dx, dy) = (x - p.x as i64, y - p.y as i64);
                        best = best.min(dx * dx + dy * dy);
                    }
                }
            }
            (best as f64).sqrt()
        })
        .collect()
}

pub fn disk_offsets(r: i64) -> Vec<(i64, i64)> {
    let mut v = Vec::new();
    for dy in -r..=r {
        for dx in -r..=r {
            if dx * dx + dy * dy <= r * r {
                v.push((dx, dy));
            }
        }
    }
    v
}

pub fn square_offsets(side: i64) -> Vec<(i64, i64)> {
    let r = side / 2;
    (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).collect()
}

fn get(mask: &BitMask, x: i64, y: i64) -> Option<bool> {
    (x >= 0 && y >= 0 && x < mask.width() as i64 && y < mask.height() as i64).then(|| mask.get(x as u32, y as u32))
}

fn build(w: u32, h: u32, f: impl Fn(i64, i64) -> bool) -> BitMask {
    let bits = (0..h as i64).flat_map(|y| (0..w as i64).map(move |x| (x, y))).map(|(x, y)| f(x, y)).collect();
    BitMask::new(w, h, bits).unwrap()
}

/// `{p : (p + B) ∩ M ≠ ∅}` inside the image (elements here are symmetric).
pub fn dilate_oracle(mask: &BitMask, offsets: &[(i64, i64)]) -> BitMask {
    build(mask.width(), mask.height(), |x, y| {
        offsets.iter().any(|(dx, dy)| get(mask, x + dx, y + dy) == Some(true))
    })
}

/// `{p : p + B ⊆ M}`, with pixels outside the image outside `M`.
pub fn erode_oracle(mask: &BitMask, offsets: &[(i64, i64)]) -> BitMask {
    build(mask.width(), mask.height(), |x, y| {
        offsets.iter().all(|(dx, dy)| get(mask, x + dx, y + dy) == Some(true))
    })
}

pub fn close_oracle(mask: &BitMask, offsets: &[(i64, i64)]) -> BitMask {
    erode_oracle(&dilate_oracle(mask, offsets), offsets)
}

/// IoU by counting pixels.
pub fn iou_oracle(a: &BBox, b: &BBox) -> f64 {
    let (mut inter, mut uni) = (0u64, 0u64);
    for y in a.y0.min(b.y0)..a.y1.max(b.y1) {
        for x in a.x0.min(b.x0)..a.x1.max(b.x1) {
            let (ia, ib) = (a.contains_point(x, y), b.contains_point(x, y));
            inter += u64::from(ia && ib);
            uni += u64::from(ia || ib);
        }
    }
    inter as f64 / uni as f64
}

/// Random mask up to 64×64: sparse noise, dense noise, or a few
/// rectangles and blobs.
pub fn random_mask(rng: &mut ChaCha8Rng) -> BitMask {
    let (w, h) = (rng.random_range(1..=64u32), rng.random_range(1..=64u32));
    match rng.random_range(0..3) {
        0 | 1 => {
            let p = rng.random_range(0.02..0.7);
            let bits = (0..w * h).map(|_| rng.random_bool(p)).collect();
            BitMask::new(w, h, bits).unwrap()
        }
        _ => {
            let shapes: Vec<(i64, i64, i64)> = (0..rng.random_range(1..6))
                .map(|_| {
                    (
                        rng.random_range(0..w as i64),
                        rng.random_range(0..h as i64),
                        rng.random_range(0..12i64),
                    )
                })
                .collect();
            build(w, h, |x, y| {
                shapes.iter().any(|&(cx, cy, r)| (x - cx).pow(2) + (y - cy).pow(2) <= r * r)
            })
        }
    }
}

/// Random map up to 64×64: few discrete levels (plenty of histogram ties)
/// or continuous values.
pub fn random_map(rng: &mut ChaCha8Rng) -> GrayMap {
    let (w, h) = (rng.random_range(1..=64u32), rng.random_range(1..=64u32));
    let n = (w * h) as usize;
    let data: Vec<f64> = match rng.random_range(0..3) {
        0 => {
            let levels = rng.random_range(1..6);
            (0..n).map(|_| rng.random_range(0..levels) as f64 * 0.25).collect()
        }
        1 => (0..n).map(|_| rng.random_range(0.0..1.0)).collect(),
        _ => {
            let (cx, cy) = (rng.random_range(0.0..w as f64), rng.random_range(0.0..h as f64));
            let s = rng.random_range(1.0..20.0);
            (0..n)
                .map(|i| {
                    let (x, y) = ((i % w as usize) as f64, (i / w as usize) as f64);
                    (-((x - cx).powi(2) + (y - cy).powi(2)) / (2.0 * s * s)).exp()
                })
                .collect()
        }
    };
    GrayMap::new(w, h, data).unwrap()
}

pub fn to_pairs(pixels: &[Point]) -> Vec<(u32, u32)> {
    pixels.iter().map(|p| (p.x, p.y)).collect()
}
