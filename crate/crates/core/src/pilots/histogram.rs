use std::collections::BTreeMap;

use crate::density::{Density, SquaredNorm};
use crate::error::{invalid, Result};
use crate::sample::Sample;

/// Bin multi-index of `x` on the partition anchored at `anchor` with the given
/// widths. Bins are right-open: `[a + k h, a + (k+1) h)`.
pub fn bin_index(x: &[f64], anchor: &[f64], widths: &[f64]) -> Vec<i64> {
    x.iter()
        .zip(anchor)
        .zip(widths)
        .map(|((v, a), h)| ((v - a) / h).floor() as i64)
        .collect()
}

pub(crate) fn check_widths(widths: &[f64], d: usize) -> Result<()> {
    if widths.len() != d {
        return Err(invalid(format!(
            "expected {d} bin widths, got {}",
            widths.len()
        )));
    }
    if widths.iter().any(|h| !(*h > 0.0) || !h.is_finite()) {
        return Err(invalid(format!(
            "bin widths must be positive and finite, got {widths:?}"
        )));
    }
    Ok(())
}

/// Regular-partition histogram with sparse bin storage.
#[derive(Debug, Clone, PartialEq)]
pub struct HistogramEstimate {
    anchor: Vec<f64>,
    widths: Vec<f64>,
    bins: BTreeMap<Vec<i64>, usize>,
    n: usize,
}

impl HistogramEstimate {
    pub fn fit(sample: &Sample, widths: &[f64], anchor: &[f64]) -> Result<Self> {
        check_widths(widths, sample.dim())?;
        if anchor.len() != sample.dim() || anchor.iter().any(|a| !a.is_finite()) {
            return Err(invalid(
                "anchor must be a finite point of the sample dimension",
            ));
        }
        let mut bins = BTreeMap::new();
        for row in sample.rows() {
            *bins.entry(bin_index(row, anchor, widths)).or_insert(0) += 1;
        }
        Ok(HistogramEstimate {
            anchor: anchor.to_vec(),
            widths: widths.to_vec(),
            bins,
            n: sample.n(),
        })
    }

    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bin_volume(&self) -> f64 {
        self.widths.iter().product()
    }

    /// Populated bins with their masses, in index order.
    pub fn bins(&self) -> impl Iterator<Item = (&[i64], f64)> + '_ {
        let n = self.n as f64;
        self.bins
            .iter()
            .map(move |(k, c)| (k.as_slice(), *c as f64 / n))
    }

    pub fn populated_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn bin_mass(&self, index: &[i64]) -> f64 {
        self.bins
            .get(index)
            .map_or(0.0, |c| *c as f64 / self.n as f64)
    }

    pub fn bin_lower(&self, index: &[i64]) -> Vec<f64> {
        index
            .iter()
            .zip(&self.anchor)
            .zip(&self.widths)
            .map(|((k, a), h)| a + *k as f64 * h)
            .collect()
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.bin_mass(&bin_index(x, &self.anchor, &self.widths)) / self.bin_volume()
    }

    /// Exact integral, i.e. the total bin mass.
    pub fn total_mass(&self) -> f64 {
        self.bins().map(|(_, m)| m).sum()
    }

    /// `F(t) = Σ_b mass(b) ∏_j clamp((t_j − lo_j)/h_j, 0, 1)`.
    pub fn cdf(&self, t: &[f64]) -> f64 {
        self.bins()
            .map(|(k, m)| {
                let lo = self.bin_lower(k);
                m * (0..t.len())
                    .map(|j| ((t[j] - lo[j]) / self.widths[j]).clamp(0.0, 1.0))
                    .product::<f64>()
            })
            .sum()
    }

    /// All corners of populated bins.
    pub fn bin_corners(&self) -> Vec<Vec<f64>> {
        let d = self.widths.len();
        let mut out = Vec::new();
        for (k, _) in self.bins() {
            let lo = self.bin_lower(k);
            for mask in 0..(1usize << d) {
                out.push(
                    (0..d)
                        .map(|j| {
                            lo[j]
                                + if mask >> j & 1 == 1 {
                                    self.widths[j]
                                } else {
                                    0.0
                                }
                        })
                        .collect(),
                );
            }
        }
        out
    }

    /// `∫ f_a f_b` for two histograms with equal widths.
    pub(crate) fn overlap(&self, other: &HistogramEstimate) -> f64 {
        let d = self.widths.len();
        let vol = self.bin_volume();
        let mut total = 0.0;
        for (k, m) in self.bins() {
            let lo = self.bin_lower(k);
            // an equal-width bin overlaps at most two bins of `other` per axis
            let base = bin_index(&lo, &other.anchor, &other.widths);
            for mask in 0..(1usize << d) {
                let idx: Vec<i64> = (0..d).map(|j| base[j] + (mask >> j & 1) as i64).collect();
                let mo = other.bin_mass(&idx);
                if mo == 0.0 {
                    continue;
                }
                let olo = other.bin_lower(&idx);
                let inter: f64 = (0..d)
                    .map(|j| {
                        let a = lo[j].max(olo[j]);
                        let b = (lo[j] + self.widths[j]).min(olo[j] + other.widths[j]);
                        (b - a).max(0.0)
                    })
                    .product();
                total += (m / vol) * (mo / other.bin_volume()) * inter;
            }
        }
        total
    }
}

impl Density for HistogramEstimate {
    fn dim(&self) -> usize {
        self.widths.len()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl SquaredNorm for HistogramEstimate {
    fn squared_l2_norm(&self) -> f64 {
        let vol = self.bin_volume();
        self.bins().map(|(_, m)| m * m / vol).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::EvalGrid;
    use rand::{Rng, SeedableRng};

    #[test]
    fn single_point_fills_one_bin() {
        let s = Sample::from_rows(&[[0.5]]).unwrap();
        let h = HistogramEstimate::fit(&s, &[1.0], &[0.0]).unwrap();
        assert_eq!(h.evaluate(&[0.0]), 1.0);
        assert_eq!(h.evaluate(&[0.999]), 1.0);
        assert_eq!(h.evaluate(&[1.0]), 0.0);
        assert_eq!(h.evaluate(&[-0.001]), 0.0);
        assert_eq!(h.evaluate(&[7.0]), 0.0);
    }

    #[test]
    fn boundary_points_belong_to_the_right_bin() {
        let s = Sample::from_rows(&[[1.0], [1.5]]).unwrap();
        let h = HistogramEstimate::fit(&s, &[0.5], &[0.0]).unwrap();
        assert_eq!(h.bin_mass(&[2]), 0.5);
        assert_eq!(h.bin_mass(&[3]), 0.5);
        assert_eq!(h.bin_mass(&[1]), 0.0);
        assert_eq!(h.evaluate(&[1.0]), 1.0);
    }

    #[test]
    fn rejects_nonpositive_widths() {
        let s = Sample::from_rows(&[[0.5, 0.5]]).unwrap();
        assert!(HistogramEstimate::fit(&s, &[1.0, 0.0], &[0.0, 0.0]).is_err());
        assert!(HistogramEstimate::fit(&s, &[1.0, -1.0], &[0.0, 0.0]).is_err());
        assert!(HistogramEstimate::fit(&s, &[1.0], &[0.0, 0.0]).is_err());
    }

    #[test]
    fn uniform_square_bins_and_aligned_quadrature() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let rows: Vec<[f64; 2]> = (0..100).map(|_| [rng.gen(), rng.gen()]).collect();
        let s = Sample::from_rows(&rows).unwrap();
        let h = HistogramEstimate::fit(&s, &[0.25, 0.25], &[0.0, 0.0]).unwrap();
        assert!((h.total_mass() - 1.0).abs() < 1e-12);
        // direct count oracle
        for (k, m) in h.bins() {
            let lo = h.bin_lower(k);
            let count = rows
                .iter()
                .filter(|r| (0..2).all(|j| r[j] >= lo[j] && r[j] < lo[j] + 0.25))
                .count();
            assert_eq!(m, count as f64 / 100.0);
            // 16 bins, ~6.25 expected per bin: density 1 within a few binomial sds
            assert!((m / 0.0625 - 1.0).abs() < 1.5);
        }
        let grid = EvalGrid::cube(0.0, 1.0, 40, 2).unwrap();
        assert!((h.integrate_on(&grid) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn permutation_invariant() {
        let rows = vec![[0.1, 2.0], [0.3, -1.0], [1.7, 0.2], [0.35, -1.1]];
        let mut rev = rows.clone();
        rev.reverse();
        let a =
            HistogramEstimate::fit(&Sample::from_rows(&rows).unwrap(), &[0.5, 0.5], &[0.0, 0.0])
                .unwrap();
        let b = HistogramEstimate::fit(&Sample::from_rows(&rev).unwrap(), &[0.5, 0.5], &[0.0, 0.0])
            .unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn cdf_limits() {
        let s = Sample::from_rows(&[[0.2, 0.2], [1.3, 0.7]]).unwrap();
        let h = HistogramEstimate::fit(&s, &[1.0, 1.0], &[0.0, 0.0]).unwrap();
        assert_eq!(h.cdf(&[10.0, 10.0]), 1.0);
        assert_eq!(h.cdf(&[-10.0, 10.0]), 0.0);
        assert!((h.cdf(&[0.5, 10.0]) - 0.25).abs() < 1e-15);
    }

    #[test]
    fn self_overlap_is_squared_norm() {
        let s = Sample::from_rows(&[[0.2, 0.2], [1.3, 0.7], [1.4, 0.1]]).unwrap();
        let h = HistogramEstimate::fit(&s, &[0.5, 1.0], &[0.0, 0.0]).unwrap();
        assert!((h.overlap(&h) - h.squared_l2_norm()).abs() < 1e-15);
    }
}
