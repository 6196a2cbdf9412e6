use rand::Rng;

use super::histogram::{check_widths, HistogramEstimate};
use crate::density::{Density, SquaredNorm};
use crate::error::{invalid, Result};
use crate::sample::Sample;
use crate::seed;

/// Equal-weight average of histograms whose anchors are jittered around the
/// origin.
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbedHistogram {
    members: Vec<HistogramEstimate>,
}

impl PerturbedHistogram {
    /// The first member is anchored at the origin; each of the remaining
    /// `count − 1` anchors shifts coordinate `j` by a uniform draw from
    /// `±fraction · widths[j]`.
    pub fn fit(
        sample: &Sample,
        widths: &[f64],
        fraction: f64,
        count: usize,
        seed: u64,
    ) -> Result<Self> {
        check_widths(widths, sample.dim())?;
        if count < 2 {
            return Err(invalid(format!(
                "perturbed histogram needs at least 2 members, got {count}"
            )));
        }
        // a zero fraction degenerates to the plain histogram
        if !(0.0..1.0).contains(&fraction) {
            return Err(invalid(format!(
                "perturbation fraction must lie in [0, 1), got {fraction}"
            )));
        }
        let d = sample.dim();
        let mut rng = seed::rng(seed);
        let mut members = Vec::with_capacity(count);
        members.push(HistogramEstimate::fit(sample, widths, &vec![0.0; d])?);
        for _ in 1..count {
            let anchor: Vec<f64> = widths
                .iter()
                .map(|h| {
                    if fraction > 0.0 {
                        rng.gen_range(-fraction..fraction) * h
                    } else {
                        0.0
                    }
                })
                .collect();
            members.push(HistogramEstimate::fit(sample, widths, &anchor)?);
        }
        Ok(PerturbedHistogram { members })
    }

    pub fn members(&self) -> &[HistogramEstimate] {
        &self.members
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        self.members.iter().map(|h| h.evaluate(x)).sum::<f64>() / self.members.len() as f64
    }

    pub fn cdf(&self, t: &[f64]) -> f64 {
        self.members.iter().map(|h| h.cdf(t)).sum::<f64>() / self.members.len() as f64
    }

    pub fn total_mass(&self) -> f64 {
        self.members
            .iter()
            .map(HistogramEstimate::total_mass)
            .sum::<f64>()
            / self.members.len() as f64
    }
}

impl Density for PerturbedHistogram {
    fn dim(&self) -> usize {
        self.members[0].widths().len()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl SquaredNorm for PerturbedHistogram {
    fn squared_l2_norm(&self) -> f64 {
        let k = self.members.len() as f64;
        let mut total = 0.0;
        for a in &self.members {
            for b in &self.members {
                total += a.overlap(b);
            }
        }
        total / (k * k)
    }
}
