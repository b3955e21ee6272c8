//! Exact squared Euclidean distance transform (Felzenszwalb–Huttenlocher).

/// Squared distance from every pixel of a `width × height` grid to the nearest
/// pixel where `is_site` holds. Pixels with no site anywhere in the grid get
/// `u64::MAX`.
pub fn squared_edt(width: usize, height: usize, is_site: impl Fn(usize, usize) -> bool) -> Vec<u64> {
    const NONE: u64 = u64::MAX;
    let mut cols = vec![NONE; width * height];
    // Pass 1: per column, 1-D distance to the nearest site (squared later).
    for x in 0..width {
        let mut last: Option<usize> = None;
        for y in 0..height {
            if is_site(x, y) {
                last = Some(y);
            }
            if let Some(l) = last {
                cols[y * width + x] = (y - l) as u64;
            }
        }
        last = None;
        for y in (0..height).rev() {
            if is_site(x, y) {
                last = Some(y);
            }
            if let Some(l) = last {
                let d = (l - y) as u64;
                let cell = &mut cols[y * width + x];
                if d < *cell {
                    *cell = d;
                }
            }
        }
    }
    for v in cols.iter_mut() {
        if *v != NONE {
            *v *= *v;
        }
    }
    // Pass 2: per row, lower envelope of parabolas.
    let mut out = vec![NONE; width * height];
    let mut sites: Vec<usize> = Vec::with_capacity(width);
    let mut bounds: Vec<f64> = Vec::with_capacity(width + 1);
    for y in 0..height {
        let row = &cols[y * width..(y + 1) * width];
        sites.clear();
        bounds.clear();
        for q in 0..width {
            if row[q] == NONE {
                continue;
            }
            loop {
                match sites.last() {
                    None => {
                        sites.push(q);
                        bounds.push(f64::NEG_INFINITY);
                        break;
                    }
                    Some(&p) => {
                        let s = intersection(row, p, q);
                        if s <= *bounds.last().unwrap() {
                            sites.pop();
                            bounds.pop();
                        } else {
                            sites.push(q);
                            bounds.push(s);
                            break;
                        }
                    }
                }
            }
        }
        if sites.is_empty() {
            continue;
        }
        let mut k = 0;
        for q in 0..width {
            while k + 1 < sites.len() && bounds[k + 1] < q as f64 {
                k += 1;
            }
            let p = sites[k];
            let dx = q.abs_diff(p) as u64;
            out[y * width + q] = dx * dx + row[p];
        }
    }
    out
}

#[inline]
fn intersection(row: &[u64], p: usize, q: usize) -> f64 {
    let (pf, qf) = (p as f64, q as f64);
    ((row[q] as f64 + qf * qf) - (row[p] as f64 + pf * pf)) / (2.0 * (qf - pf))
}
