use std::f64::consts::PI;

use crate::density::{std_normal_cdf, Density, SquaredNorm};
use crate::error::{invalid, Result};
use crate::mixture::sq_dist;
use crate::sample::Sample;

/// Product-Gaussian kernel density estimate with a common bandwidth.
#[derive(Debug, Clone, PartialEq)]
pub struct Kde {
    sample: Sample,
    h: f64,
}

impl Kde {
    pub fn new(sample: &Sample, h: f64) -> Result<Self> {
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid(format!(
                "bandwidth must be positive and finite, got {h}"
            )));
        }
        Ok(Kde {
            sample: sample.clone(),
            h,
        })
    }

    pub fn bandwidth(&self) -> f64 {
        self.h
    }

    pub fn sample(&self) -> &Sample {
        &self.sample
    }

    /// `(1/(n h^d)) Σ_i ∏_j φ((x_j − Y_ij)/h)`.
    pub fn evaluate(&self, x: &[f64]) -> f64 {
        kde_evaluate(&self.sample, self.h, x)
    }

    /// Kernel-smoothed distribution function `(1/n) Σ_i ∏_j Φ((t_j − Y_ij)/h)`.
    pub fn cdf(&self, t: &[f64]) -> f64 {
        self.sample
            .rows()
            .map(|r| {
                r.iter()
                    .zip(t)
                    .map(|(y, a)| std_normal_cdf((a - y) / self.h))
                    .product::<f64>()
            })
            .sum::<f64>()
            / self.sample.n() as f64
    }
}

/// Product-Gaussian KDE value at `x`.
pub fn kde_evaluate(sample: &Sample, h: f64, x: &[f64]) -> f64 {
    let d = sample.dim() as f64;
    let c = (2.0 * PI * h * h).powf(-0.5 * d) / sample.n() as f64;
    let inv = 0.5 / (h * h);
    c * sample
        .rows()
        .map(|r| (-sq_dist(x, r) * inv).exp())
        .sum::<f64>()
}

impl Density for Kde {
    fn dim(&self) -> usize {
        self.sample.dim()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl SquaredNorm for Kde {
    /// `(1/n²) Σ_i Σ_k φ_{h√2}(Y_i − Y_k)`.
    fn squared_l2_norm(&self) -> f64 {
        let n = self.sample.n() as f64;
        let d = self.sample.dim() as f64;
        let c = (4.0 * PI * self.h * self.h).powf(-0.5 * d);
        let inv = 0.25 / (self.h * self.h);
        let mut total = 0.0;
        for a in self.sample.rows() {
            for b in self.sample.rows() {
                total += (-sq_dist(a, b) * inv).exp();
            }
        }
        c * total / (n * n)
    }
}
