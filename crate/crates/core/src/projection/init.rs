//! Initial component means on a regular grid over a box.

use crate::error::{invalid, Result};

/// `S` means on the smallest `k^d ≥ S` grid of cell centers in `[-M, M]^d`.
///
/// Axis `j` uses centers `−M + (2i+1)M/k`, `i = 0..k`. When `k^d > S` the `S`
/// points closest to the box center are kept, ties resolved by grid order.
pub fn grid_means(components: usize, d: usize, box_m: f64) -> Result<Vec<Vec<f64>>> {
    if !(box_m > 0.0 && box_m.is_finite()) {
        return Err(invalid(format!(
            "box half-width must be positive, got {box_m}"
        )));
    }
    grid_means_in(components, &vec![-box_m; d], &vec![box_m; d])
}

/// Same construction over the box `[lo, hi]`: axis `j` uses centers
/// `lo_j + (2i+1)(hi_j − lo_j)/(2k)`, and the kept points are those closest
/// to the box center.
pub fn grid_means_in(components: usize, lo: &[f64], hi: &[f64]) -> Result<Vec<Vec<f64>>> {
    let d = lo.len();
    if components == 0 || d == 0 || hi.len() != d {
        return Err(invalid(
            "grid initialization needs S ≥ 1, d ≥ 1 and matching bounds",
        ));
    }
    if lo
        .iter()
        .zip(hi)
        .any(|(a, b)| !(a.is_finite() && b.is_finite() && a <= b))
    {
        return Err(invalid("grid bounds must be finite with lo ≤ hi"));
    }
    let mut k = 1usize;
    while k.checked_pow(d as u32).map_or(false, |v| v < components) {
        k += 1;
    }
    let centers: Vec<Vec<f64>> = (0..d)
        .map(|j| {
            (0..k)
                .map(|i| lo[j] + (2 * i + 1) as f64 * (hi[j] - lo[j]) / (2 * k) as f64)
                .collect()
        })
        .collect();
    let mid: Vec<f64> = lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect();
    let total = k.pow(d as u32);
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(total);
    for flat in 0..total {
        let mut rem = flat;
        let mut p = vec![0.0; d];
        for j in (0..d).rev() {
            p[j] = centers[j][rem % k];
            rem /= k;
        }
        points.push(p);
    }
    if total > components {
        let dist = |p: &Vec<f64>| {
            p.iter()
                .zip(&mid)
                .map(|(v, c)| (v - c) * (v - c))
                .sum::<f64>()
        };
        points.sort_by(|a, b| dist(a).partial_cmp(&dist(b)).expect("finite grid"));
        points.truncate(components);
    }
    Ok(points)
}
