//! Bin-width and bandwidth rules.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mixture::sq_dist;
use crate::sample::Sample;

/// How pilot smoothing parameters are chosen.
///
/// The two IQR rules differ only in the rate: `n^{-1/4}` for the bivariate
/// simulation defaults and `n^{-1/(2d)}` for the graphical and classification
/// studies. Both are kept because the two settings use different rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum BandwidthRule {
    /// `c · IQR_j · n^{-1/4}`.
    IqrQuarter { c: f64 },
    /// `c · IQR_j · n^{-1/(2d)}`.
    Iqr2d { c: f64 },
    /// Least-squares cross-validation over a grid (default grid if `None`).
    Lscv { grid: Option<Vec<f64>> },
    /// `c · n^{-1/(2(ℓ+1))} · √(log log n) / log n`.
    Undersmoothed { c: f64, smoothness: u32 },
}

impl BandwidthRule {
    pub fn validate(&self) -> Result<()> {
        match self {
            BandwidthRule::IqrQuarter { c }
            | BandwidthRule::Iqr2d { c }
            | BandwidthRule::Undersmoothed { c, .. } => {
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(invalid(format!("rule constant must be positive, got {c}")));
                }
            }
            BandwidthRule::Lscv { grid: Some(g) } => {
                if g.is_empty() || g.iter().any(|h| !(*h > 0.0)) {
                    return Err(invalid("LSCV grid must be nonempty and positive"));
                }
            }
            BandwidthRule::Lscv { grid: None } => {}
        }
        Ok(())
    }

    /// Scalar KDE bandwidth for the kernel rules.
    pub fn kde_bandwidth(&self, sample: &Sample) -> Result<f64> {
        self.validate()?;
        match self {
            BandwidthRule::Lscv { grid } => {
                let g = match grid {
                    Some(g) => g.clone(),
                    None => default_lscv_grid(sample),
                };
                lscv_bandwidth(sample, &g)
            }
            BandwidthRule::Undersmoothed { c, smoothness } => {
                undersmoothed_bandwidth(sample.n(), *smoothness, *c)
            }
            _ => Err(invalid(
                "IQR rules produce bin widths, not a kernel bandwidth",
            )),
        }
    }
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = p * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn iqr(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite sample"));
    quantile(&v, 0.75) - quantile(&v, 0.25)
}

/// Per-coordinate IQR bin widths.
pub fn iqr_binwidths(sample: &Sample, rule: &BandwidthRule) -> Result<Vec<f64>> {
    rule.validate()?;
    let n = sample.n() as f64;
    let d = sample.dim() as f64;
    let (c, rate) = match rule {
        BandwidthRule::IqrQuarter { c } => (*c, n.powf(-0.25)),
        BandwidthRule::Iqr2d { c } => (*c, n.powf(-1.0 / (2.0 * d))),
        _ => return Err(invalid("bin widths require an IQR rule")),
    };
    (0..sample.dim())
        .map(|j| {
            let q = iqr(&sample.column(j));
            if q > 0.0 {
                Ok(c * q * rate)
            } else {
                Err(Error::DegenerateCoordinate { coordinate: j })
            }
        })
        .collect()
}

/// `c · n^{-1/(2(ℓ+1))} · √(log log n) / log n`; the `1/log n` factor makes the
/// schedule a strict little-o of the undersmoothing bound.
pub fn undersmoothed_bandwidth(n: usize, smoothness: u32, c: f64) -> Result<f64> {
    if n < 3 {
        return Err(invalid(format!(
            "undersmoothed bandwidth needs n ≥ 3, got {n}"
        )));
    }
    if !(c > 0.0 && c.is_finite()) {
        return Err(invalid(format!("constant must be positive, got {c}")));
    }
    let n = n as f64;
    let ln = n.ln();
    Ok(c * n.powf(-1.0 / (2.0 * (smoothness as f64 + 1.0))) * ln.ln().sqrt() / ln)
}

/// Scott-type reference bandwidth: mean coordinate sd times `n^{-1/(d+4)}`.
pub fn scott_reference(sample: &Sample) -> f64 {
    let n = sample.n() as f64;
    let d = sample.dim();
    let mean = sample.mean();
    let sd: f64 = (0..d)
        .map(|j| {
            let v: f64 =
                sample.rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
            v.sqrt()
        })
        .sum::<f64>()
        / d as f64;
    sd * n.powf(-1.0 / (d as f64 + 4.0))
}

/// 30 log-spaced points spanning `[0.05, 2] × scott_reference`.
pub fn default_lscv_grid(sample: &Sample) -> Vec<f64> {
    let r = scott_reference(sample).max(1e-12);
    let (lo, hi) = (0.05_f64.ln(), 2.0_f64.ln());
    (0..30)
        .map(|k| r * (lo + (hi - lo) * k as f64 / 29.0).exp())
        .collect()
}

/// Least-squares cross-validation score for a product-Gaussian KDE,
/// `∫ f̂_h² − (2/n) Σ_i f̂_{h,−i}(Y_i)`, from precomputed squared distances.
fn lscv_from_distances(dist: &[f64], n: usize, d: usize, h: f64) -> f64 {
    let nf = n as f64;
    let df = d as f64;
    let c_conv = (4.0 * PI * h * h).powf(-0.5 * df);
    let c_ker = (2.0 * PI * h * h).powf(-0.5 * df);
    let mut conv_off = 0.0;
    let mut ker_off = 0.0;
    for &dd in dist {
        conv_off += (-0.25 * dd / (h * h)).exp();
        ker_off += (-0.5 * dd / (h * h)).exp();
    }
    // dist holds each unordered pair once
    let int_sq = c_conv * (nf + 2.0 * conv_off) / (nf * nf);
    let loo = c_ker * 2.0 * ker_off / (nf * (nf - 1.0));
    int_sq - 2.0 * loo
}

fn pair_distances(sample: &Sample) -> Vec<f64> {
    let n = sample.n();
    let mut out = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for k in (i + 1)..n {
            out.push(sq_dist(sample.row(i), sample.row(k)));
        }
    }
    out
}

/// LSCV criterion at a single bandwidth.
pub fn lscv_score(sample: &Sample, h: f64) -> Result<f64> {
    if sample.n() < 2 {
        return Err(invalid("LSCV needs at least two observations"));
    }
    if !(h > 0.0) {
        return Err(invalid("bandwidth must be positive"));
    }
    Ok(lscv_from_distances(
        &pair_distances(sample),
        sample.n(),
        sample.dim(),
        h,
    ))
}

/// Grid minimizer of the LSCV criterion; ties go to the smaller bandwidth.
pub fn lscv_bandwidth(sample: &Sample, grid: &[f64]) -> Result<f64> {
    if grid.is_empty() {
        return Err(invalid("LSCV search grid is empty"));
    }
    if grid.iter().any(|h| !(*h > 0.0 && h.is_finite())) {
        return Err(invalid("LSCV grid entries must be positive"));
    }
    if grid.len() == 1 {
        return Ok(grid[0]);
    }
    if sample.n() < 2 {
        return Err(invalid("LSCV needs at least two observations"));
    }
    let dist = pair_distances(sample);
    let mut best = (f64::INFINITY, f64::INFINITY);
    for &h in grid {
        let cv = lscv_from_distances(&dist, sample.n(), sample.dim(), h);
        if cv < best.0 || (cv == best.0 && h < best.1) {
            best = (cv, h);
        }
    }
    Ok(best.1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::GaussianMixture;
    use crate::pilots::kde::kde_evaluate;

    #[test]
    fn quantiles_interpolate_linearly() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.25), 1.75);
        assert_eq!(quantile(&v, 0.75), 3.25);
        assert_eq!(iqr(&v), 1.5);
    }

    #[test]
    fn constant_coordinate_is_degenerate() {
        let s = Sample::from_rows(&[[1.0, 0.0], [1.0, 2.0], [1.0, 3.0]]).unwrap();
        let err = iqr_binwidths(&s, &BandwidthRule::IqrQuarter { c: 1.0 }).unwrap_err();
        assert!(matches!(err, Error::DegenerateCoordinate { coordinate: 0 }));
    }

    #[test]
    fn uniform_coordinate_quarter_rule() {
        // exact uniform quantiles: IQR = 0.5 on 256 evenly spread points
        let rows: Vec<[f64; 1]> = (0..256).map(|i| [i as f64 / 255.0]).collect();
        let s = Sample::from_rows(&rows).unwrap();
        let w = iqr_binwidths(&s, &BandwidthRule::IqrQuarter { c: 1.0 }).unwrap();
        assert!((w[0] - 0.125).abs() < 1e-12);
        let w2 = iqr_binwidths(&s, &BandwidthRule::Iqr2d { c: 2.0 }).unwrap();
        assert!((w2[0] - 2.0 * 0.5 * 256f64.powf(-0.5)).abs() < 1e-12);
    }

    #[test]
    fn undersmoothed_schedule() {
        assert!(undersmoothed_bandwidth(2, 1, 1.0).is_err());
        let n = 1000f64;
        let expect = n.powf(-0.25) * n.ln().ln().sqrt() / n.ln();
        assert!((undersmoothed_bandwidth(1000, 1, 1.0).unwrap() - expect).abs() < 1e-15);
        let ratio = |n: usize| {
            let nf = n as f64;
            undersmoothed_bandwidth(n, 1, 1.0).unwrap() / (nf.powf(-0.25) * nf.ln().ln().sqrt())
        };
        assert!(ratio(1_000) > ratio(1_000_000) && ratio(1_000_000) > ratio(1_000_000_000));
        // exponent −1/(2(ℓ+1)) rises toward zero, so h grows with ℓ
        let h0 = undersmoothed_bandwidth(500, 0, 1.0).unwrap();
        let h1 = undersmoothed_bandwidth(500, 1, 1.0).unwrap();
        assert!(h1 > h0);
    }

    #[test]
    fn single_element_grid() {
        let s = Sample::from_rows(&[[0.0], [1.0]]).unwrap();
        assert_eq!(lscv_bandwidth(&s, &[0.37]).unwrap(), 0.37);
        assert!(lscv_bandwidth(&s, &[]).is_err());
    }

    /// LSCV by brute-force numerical integration of `∫ f̂²` and explicit
    /// leave-one-out sums.
    fn lscv_brute(s: &Sample, h: f64) -> f64 {
        let step = 0.002;
        let (lo, hi) = (-6.0 - 6.0 * h, 6.0 + 6.0 * h);
        let m = ((hi - lo) / step) as usize;
        let int_sq: f64 = (0..m)
            .map(|k| kde_evaluate(s, h, &[lo + (k as f64 + 0.5) * step]).powi(2))
            .sum::<f64>()
            * step;
        let n = s.n();
        let loo: f64 = (0..n)
            .map(|i| {
                let idx: Vec<usize> = (0..n).filter(|&k| k != i).collect();
                kde_evaluate(&s.select(&idx).unwrap(), h, s.row(i))
            })
            .sum();
        int_sq - 2.0 * loo / n as f64
    }

    #[test]
    fn lscv_selection_agrees_with_brute_force() {
        let s = GaussianMixture::single(vec![0.0], 1.0)
            .unwrap()
            .sample(200, 42)
            .unwrap();
        let grid: Vec<f64> = (1..=20).map(|k| 0.05 * k as f64).collect();
        let chosen = lscv_bandwidth(&s, &grid).unwrap();
        let brute = grid
            .iter()
            .map(|&h| (lscv_brute(&s, h), h))
            .fold((f64::INFINITY, 0.0), |a, b| if b.0 < a.0 { b } else { a })
            .1;
        assert!(
            (chosen - brute).abs() <= 0.05 + 1e-12,
            "chosen {chosen}, brute {brute}"
        );
        let best = lscv_score(&s, chosen).unwrap();
        for &h in &grid {
            assert!(best <= lscv_score(&s, h).unwrap());
        }
        for &h in &[0.2, 0.5] {
            assert!((lscv_score(&s, h).unwrap() - lscv_brute(&s, h)).abs() < 1e-6);
        }
    }
}
