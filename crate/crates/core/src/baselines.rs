//! Fixed-scale spherical Gaussian EM.
//!
//! Location mixture EM in which every component shares the covariance
//! `q̄ I_d`; only weights and means are updated.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::mixture::GaussianMixture;
use crate::sample::Sample;
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmConfig {
    pub components: usize,
    pub qbar: f64,
    pub max_iters: usize,
    pub loglik_rel_tol: f64,
    pub seed: u64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig::new(36, 0.7, 0)
    }
}

impl EmConfig {
    pub fn new(components: usize, qbar: f64, seed: u64) -> Self {
        EmConfig {
            components,
            qbar,
            max_iters: 500,
            loglik_rel_tol: 1e-8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(invalid("S must be at least 1"));
        }
        if !(self.qbar > 0.0 && self.qbar.is_finite()) {
            return Err(invalid(format!("qbar must be positive, got {}", self.qbar)));
        }
        if self.max_iters == 0 || !(self.loglik_rel_tol > 0.0) {
            return Err(invalid("iteration cap and tolerance must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmFit {
    pub mixture: GaussianMixture,
    /// Log-likelihood at the initial parameters and after each update.
    pub loglik: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `(iteration, component)` pairs re-seeded after losing all responsibility.
    pub reinitialized: Vec<(usize, usize)>,
}

/// EM for `Σ_s π_s φ(·; μ_s, q̄ I)` with `q̄` held fixed. Means start at `S`
/// distinct data rows drawn with the configured seed.
pub fn em_spherical(sample: &Sample, cfg: &EmConfig) -> Result<EmFit> {
    cfg.validate()?;
    let n = sample.n();
    let d = sample.dim();
    let s = cfg.components;
    if s > n {
        return Err(invalid(format!(
            "S = {s} exceeds the {n} available data rows"
        )));
    }
    let mut rng = seed::rng(cfg.seed);
    let mut means: Vec<Vec<f64>> = index::sample(&mut rng, n, s)
        .into_iter()
        .map(|i| sample.row(i).to_vec())
        .collect();
    let mut weights = vec![1.0 / s as f64; s];
    let log_peak = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * cfg.qbar).ln();
    let half_inv = 0.5 / cfg.qbar;

    let mut loglik = Vec::new();
    let mut reinitialized = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    let mut resp = vec![0.0; n * s];
    loop {
        // E-step
        let mut ll = 0.0;
        for (i, y) in sample.rows().enumerate() {
            let row = &mut resp[i * s..(i + 1) * s];
            let mut top = f64::NEG_INFINITY;
            for c in 0..s {
                let dist: f64 = y
                    .iter()
                    .zip(&means[c])
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum();
                row[c] = if weights[c] > 0.0 {
                    weights[c].ln() - dist * half_inv
                } else {
                    f64::NEG_INFINITY
                };
                top = top.max(row[c]);
            }
            let mut total = 0.0;
            for v in row.iter_mut() {
                *v = (*v - top).exp();
                total += *v;
            }
            row.iter_mut().for_each(|v| *v /= total);
            ll += top + total.ln() + log_peak;
        }
        if let Some(&prev) = loglik.last() {
            let prev: f64 = prev;
            loglik.push(ll);
            if (ll - prev).abs() <= cfg.loglik_rel_tol * prev.abs() {
                converged = true;
                break;
            }
        } else {
            loglik.push(ll);
        }
        if iterations == cfg.max_iters {
            break;
        }
        iterations += 1;
        // M-step
        let mut mass = vec![0.0; s];
        let mut sums = vec![vec![0.0; d]; s];
        for (i, y) in sample.rows().enumerate() {
            for c in 0..s {
                let g = resp[i * s + c];
                mass[c] += g;
                for j in 0..d {
                    sums[c][j] += g * y[j];
                }
            }
        }
        for c in 0..s {
            if mass[c] > 0.0 {
                weights[c] = mass[c] / n as f64;
                for j in 0..d {
                    means[c][j] = sums[c][j] / mass[c];
                }
            } else {
                means[c] = sample.row(rng.gen_range(0..n)).to_vec();
                weights[c] = 1.0 / n as f64;
                reinitialized.push((iterations, c));
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
    }
    let box_m = GaussianMixture::default_box(sample, cfg.qbar);
    let mixture = GaussianMixture::new(weights, means, cfg.qbar, box_m)?;
    Ok(EmFit {
        mixture,
        loglik,
        converged,
        iterations,
        reinitialized,
    })
}
