//! Component means for fixed weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::ProjectionConfig;
use crate::error::{invalid, Result};
use crate::mixture::UNDERFLOW;
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanSolver {
    /// Projected gradient with backtracking, diagonally preconditioned by the
    /// Gauss–Newton curvature of each coordinate.
    #[default]
    ProjectedGradient,
    /// Projected Levenberg–Marquardt with a ratio-tested damping parameter.
    TrustRegion,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeansSolution {
    pub means: Vec<Vec<f64>>,
    pub criterion: f64,
    /// Components held fixed because their kernel underflows at every datum
    /// or their gradient is not finite.
    pub frozen: Vec<usize>,
    pub iterations: usize,
}

/// Least-squares criterion `(1/n) Σ_i (t_i − Σ_s π_s φ(Y_i; μ_s, q̄I))²` with
/// the means stored flat.
pub(crate) struct Problem<'a> {
    pub target: &'a [f64],
    pub sample: &'a Sample,
    pub qbar: f64,
    pub peak: f64,
}

impl<'a> Problem<'a> {
    pub fn new(target: &'a [f64], sample: &'a Sample, qbar: f64) -> Result<Self> {
        if target.len() != sample.n() {
            return Err(invalid(format!(
                "{} target values for {} observations",
                target.len(),
                sample.n()
            )));
        }
        if target.iter().any(|v| !v.is_finite()) {
            return Err(invalid("target values must be finite"));
        }
        if !(qbar > 0.0 && qbar.is_finite()) {
            return Err(invalid(format!("qbar must be positive, got {qbar}")));
        }
        let peak = (2.0 * std::f64::consts::PI * qbar).powf(-0.5 * sample.dim() as f64);
        Ok(Problem {
            target,
            sample,
            qbar,
            peak,
        })
    }

    pub fn n(&self) -> usize {
        self.sample.n()
    }

    pub fn d(&self) -> usize {
        self.sample.dim()
    }

    /// Kernel values, row-major `n × S`.
    pub fn kernels(&self, means: &[f64]) -> Vec<f64> {
        let d = self.d();
        let s = means.len() / d;
        let half_inv = 0.5 / self.qbar;
        let mut out = Vec::with_capacity(self.n() * s);
        for y in self.sample.rows() {
            for mu in means.chunks_exact(d) {
                let dist: f64 = y.iter().zip(mu).map(|(a, b)| (a - b) * (a - b)).sum();
                out.push(self.peak * (-dist * half_inv).exp());
            }
        }
        out
    }

    pub fn residuals(&self, kernels: &[f64], weights: &[f64]) -> Vec<f64> {
        let s = weights.len();
        kernels
            .chunks_exact(s)
            .zip(self.target)
            .map(|(row, t)| t - row.iter().zip(weights).map(|(k, w)| k * w).sum::<f64>())
            .collect()
    }

    pub fn criterion_from(&self, kernels: &[f64], weights: &[f64]) -> f64 {
        self.residuals(kernels, weights)
            .iter()
            .map(|r| r * r)
            .sum::<f64>()
            / self.n() as f64
    }

    pub fn criterion(&self, weights: &[f64], means: &[f64]) -> f64 {
        self.criterion_from(&self.kernels(means), weights)
    }

    /// Gradient of the criterion in the means, flat `S·d`.
    pub fn mean_gradient(&self, kernels: &[f64], weights: &[f64], means: &[f64]) -> Vec<f64> {
        let d = self.d();
        let s = weights.len();
        let res = self.residuals(kernels, weights);
        let scale = -2.0 / (self.n() as f64 * self.qbar);
        let mut g = vec![0.0; s * d];
        for (i, y) in self.sample.rows().enumerate() {
            let row = &kernels[i * s..(i + 1) * s];
            for c in 0..s {
                let coef = res[i] * weights[c] * row[c];
                if coef == 0.0 {
                    continue;
                }
                for j in 0..d {
                    g[c * d + j] += coef * (y[j] - means[c * d + j]);
                }
            }
        }
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    /// Gradient of the criterion in the weights.
    pub fn weight_gradient(&self, kernels: &[f64], weights: &[f64]) -> Vec<f64> {
        let s = weights.len();
        let res = self.residuals(kernels, weights);
        let mut g = vec![0.0; s];
        for (row, r) in kernels.chunks_exact(s).zip(&res) {
            for c in 0..s {
                g[c] += r * row[c];
            }
        }
        let scale = -2.0 / self.n() as f64;
        g.iter_mut().for_each(|v| *v *= scale);
        g
    }

    /// Jacobian of the residuals in the means, row-major `n × S·d`.
    fn jacobian(&self, kernels: &[f64], weights: &[f64], means: &[f64]) -> DMatrix<f64> {
        let d = self.d();
        let s = weights.len();
        let mut jac = DMatrix::<f64>::zeros(self.n(), s * d);
        for (i, y) in self.sample.rows().enumerate() {
            for c in 0..s {
                let k = weights[c] * kernels[i * s + c] / self.qbar;
                if k == 0.0 {
                    continue;
                }
                for j in 0..d {
                    jac[(i, c * d + j)] = -k * (y[j] - means[c * d + j]);
                }
            }
        }
        jac
    }

    /// Components whose kernels underflow at every datum.
    pub fn underflowing(&self, kernels: &[f64], s: usize) -> Vec<usize> {
        (0..s)
            .filter(|&c| kernels.chunks_exact(s).all(|row| row[c] <= UNDERFLOW))
            .collect()
    }
}

pub(crate) fn flatten(means: &[Vec<f64>]) -> Vec<f64> {
    means.iter().flatten().copied().collect()
}

pub(crate) fn unflatten(flat: &[f64], d: usize) -> Vec<Vec<f64>> {
    flat.chunks_exact(d).map(<[f64]>::to_vec).collect()
}

pub(crate) fn clip(x: &mut [f64], box_m: f64) {
    x.iter_mut().for_each(|v| *v = v.clamp(-box_m, box_m));
}

/// Kernel matrix with entry `(i, s) = φ(Y_i; μ_s, q̄ I)`.
pub fn design_matrix(sample: &Sample, means: &[Vec<f64>], qbar: f64) -> DMatrix<f64> {
    let s = means.len();
    let d = sample.dim();
    let peak = (2.0 * std::f64::consts::PI * qbar).powf(-0.5 * d as f64);
    DMatrix::from_fn(sample.n(), s, |i, c| {
        let dist: f64 = sample
            .row(i)
            .iter()
            .zip(&means[c])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
        peak * (-0.5 * dist / qbar).exp()
    })
}

/// Criterion value `(1/n) Σ_i (t_i − f(Y_i))²`.
pub fn criterion(
    target: &[f64],
    sample: &Sample,
    weights: &[f64],
    means: &[Vec<f64>],
    qbar: f64,
) -> Result<f64> {
    let p = Problem::new(target, sample, qbar)?;
    Ok(p.criterion(weights, &flatten(means)))
}

/// Analytic gradient of the criterion with respect to each mean.
pub fn mean_gradient(
    target: &[f64],
    sample: &Sample,
    weights: &[f64],
    means: &[Vec<f64>],
    qbar: f64,
) -> Result<Vec<Vec<f64>>> {
    let p = Problem::new(target, sample, qbar)?;
    let flat = flatten(means);
    let k = p.kernels(&flat);
    Ok(unflatten(
        &p.mean_gradient(&k, weights, &flat),
        sample.dim(),
    ))
}

/// Descend the criterion in the means with the weights held fixed. The
/// returned criterion never exceeds the value at `means_init`.
pub fn solve_means(
    target: &[f64],
    sample: &Sample,
    weights: &[f64],
    means_init: &[Vec<f64>],
    cfg: &ProjectionConfig,
) -> Result<MeansSolution> {
    let box_m = cfg.resolved_box(sample);
    let p = Problem::new(target, sample, cfg.qbar)?;
    if weights.len() != means_init.len() || means_init.iter().any(|m| m.len() != sample.dim()) {
        return Err(invalid("weights and means disagree in shape"));
    }
    let mut x = flatten(means_init);
    clip(&mut x, box_m);
    let (x, crit, frozen, iterations) = match cfg.mean_solver {
        MeanSolver::ProjectedGradient => descend_pg(
            &p,
            weights,
            x,
            box_m,
            cfg.max_inner_iters,
            cfg.inner_rel_tol,
        ),
        MeanSolver::TrustRegion => descend_lm(
            &p,
            weights,
            x,
            box_m,
            cfg.max_inner_iters,
            cfg.inner_rel_tol,
        ),
    };
    Ok(MeansSolution {
        means: unflatten(&x, sample.dim()),
        criterion: crit,
        frozen,
        iterations,
    })
}

/// Zero the gradient of frozen components; returns the frozen list.
fn freeze(p: &Problem, kernels: &[f64], grad: &mut [f64], s: usize) -> Vec<usize> {
    let d = p.d();
    let mut frozen = p.underflowing(kernels, s);
    for c in 0..s {
        if grad[c * d..(c + 1) * d].iter().any(|v| !v.is_finite()) && !frozen.contains(&c) {
            frozen.push(c);
        }
    }
    frozen.sort_unstable();
    for &c in &frozen {
        grad[c * d..(c + 1) * d].iter_mut().for_each(|v| *v = 0.0);
    }
    frozen
}

const ARMIJO_C: f64 = 1e-4;

fn descend_pg(
    p: &Problem,
    weights: &[f64],
    mut x: Vec<f64>,
    box_m: f64,
    max_iters: usize,
    rel_tol: f64,
) -> (Vec<f64>, f64, Vec<usize>, usize) {
    let d = p.d();
    let s = weights.len();
    let mut kernels = p.kernels(&x);
    let mut f = p.criterion_from(&kernels, weights);
    let mut frozen_all: Vec<usize> = Vec::new();
    let mut alpha = 1.0_f64;
    let mut iterations = 0;
    for it in 1..=max_iters {
        iterations = it;
        let mut g = p.mean_gradient(&kernels, weights, &x);
        let frozen = freeze(p, &kernels, &mut g, s);
        for c in frozen {
            if !frozen_all.contains(&c) {
                frozen_all.push(c);
            }
        }
        // diagonal Gauss–Newton curvature
        let mut curv = vec![0.0; s * d];
        for (i, y) in p.sample.rows().enumerate() {
            for c in 0..s {
                let k = weights[c] * kernels[i * s + c] / p.qbar;
                if k == 0.0 {
                    continue;
                }
                for j in 0..d {
                    let v = k * (y[j] - x[c * d + j]);
                    curv[c * d + j] += v * v;
                }
            }
        }
        let cmax = curv.iter().cloned().fold(0.0, f64::max);
        if cmax == 0.0 || g.iter().all(|v| *v == 0.0) {
            break;
        }
        let floor = 1e-6 * cmax;
        let scale = 2.0 / p.n() as f64;
        let dir: Vec<f64> = g
            .iter()
            .zip(&curv)
            .map(|(gi, ci)| gi / (scale * ci + scale * floor))
            .collect();

        let mut a = (2.0 * alpha).min(16.0);
        let mut accepted = None;
        for _ in 0..60 {
            let mut trial: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi - a * di).collect();
            clip(&mut trial, box_m);
            let decrease: f64 = g
                .iter()
                .zip(trial.iter().zip(&x))
                .map(|(gi, (t, xi))| gi * (t - xi))
                .sum();
            if decrease >= 0.0 {
                break;
            }
            let tk = p.kernels(&trial);
            let ft = p.criterion_from(&tk, weights);
            if ft <= f + ARMIJO_C * decrease {
                accepted = Some((trial, tk, ft));
                break;
            }
            a *= 0.5;
        }
        let Some((trial, tk, ft)) = accepted else {
            break;
        };
        alpha = a;
        let prev = f;
        x = trial;
        kernels = tk;
        f = ft;
        if prev - f <= rel_tol * prev {
            break;
        }
    }
    frozen_all.sort_unstable();
    (x, f, frozen_all, iterations)
}

fn descend_lm(
    p: &Problem,
    weights: &[f64],
    mut x: Vec<f64>,
    box_m: f64,
    max_iters: usize,
    rel_tol: f64,
) -> (Vec<f64>, f64, Vec<usize>, usize) {
    let s = weights.len();
    let d = p.d();
    let n = p.n() as f64;
    let mut kernels = p.kernels(&x);
    let mut f = p.criterion_from(&kernels, weights);
    let mut frozen_all: Vec<usize> = Vec::new();
    let mut lambda = 1e-3;
    let mut iterations = 0;
    for it in 1..=max_iters {
        iterations = it;
        let mut g = p.mean_gradient(&kernels, weights, &x);
        let frozen = freeze(p, &kernels, &mut g, s);
        let jac = p.jacobian(&kernels, weights, &x);
        let mut jtj = jac.transpose() * &jac;
        for &c in &frozen {
            for j in 0..d {
                let k = c * d + j;
                jtj.row_mut(k).fill(0.0);
                jtj.column_mut(k).fill(0.0);
            }
            if !frozen_all.contains(&c) {
                frozen_all.push(c);
            }
        }
        let dmax = jtj.diagonal().max();
        if dmax == 0.0 || g.iter().all(|v| *v == 0.0) {
            break;
        }
        // criterion gradient is (2/n) Jᵀr, so the Gauss–Newton step solves JᵀJ δ = −Jᵀr
        let jtr = DVector::from_iterator(g.len(), g.iter().map(|v| v * n / 2.0));
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..a.nrows() {
                a[(k, k)] += lambda * (jtj[(k, k)] + 1e-9 * dmax);
            }
            let Some(delta) = a.cholesky().map(|c| c.solve(&(-&jtr))) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = x.iter().zip(delta.iter()).map(|(xi, di)| xi + di).collect();
            clip(&mut trial, box_m);
            let step = DVector::from_iterator(x.len(), trial.iter().zip(&x).map(|(t, xi)| t - xi));
            // predicted decrease of (1/n)‖r + Jδ‖²
            let predicted = -(2.0 * jtr.dot(&step) + step.dot(&(&jtj * &step))) / n;
            let tk = p.kernels(&trial);
            let ft = p.criterion_from(&tk, weights);
            if predicted > 0.0 && ft < f {
                let rho = (f - ft) / predicted;
                if rho > 0.75 {
                    lambda = (lambda / 3.0).max(1e-12);
                } else if rho < 0.25 {
                    lambda *= 2.0;
                }
                let prev = f;
                x = trial;
                kernels = tk;
                f = ft;
                improved = prev - f > rel_tol * prev;
                break;
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    frozen_all.sort_unstable();
    (x, f, frozen_all, iterations)
}
