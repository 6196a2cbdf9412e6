//! Log-concavity margin and the penalized alternation.
//!
//! The margin of a mixture on a grid is the smallest eigenvalue of
//! `−∇∇ᵀ log f` over the grid points; a nonnegative margin certifies
//! log-concavity there. That matrix splits into a positive semidefinite score
//! term and the constraint term `(1/f) Σ_s (π_s/q̄) φ_s (I − u_s u_sᵀ)`, whose
//! own smallest eigenvalue is a lower bound on the margin.

use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use super::means::{clip, unflatten, Problem};
use super::weights::{project_simplex, solve_weights_from};
use super::{design_matrix, ProjectionConfig, ProjectionTrace, TraceFlag};
use crate::error::{invalid, Result};
use crate::grid::EvalGrid;
use crate::mixture::{min_eigen, GaussianMixture, UNDERFLOW};

/// Grid cells per axis used by the penalty.
pub const PENALTY_CELLS: usize = 32;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginReport {
    /// Minimum eigenvalue over the evaluated points (`+∞` if none).
    pub margin: f64,
    pub argmin: Option<Vec<f64>>,
    /// Points skipped because the mixture underflows there.
    pub skipped: usize,
}

/// The `PENALTY_CELLS^d` midpoint grid on `[-M, M]^d`.
pub fn penalty_grid(box_m: f64, d: usize) -> Result<EvalGrid> {
    if d > 2 {
        return Err(invalid(format!(
            "the log-concavity penalty supports d ≤ 2, got d = {d}"
        )));
    }
    EvalGrid::cube(-box_m, box_m, PENALTY_CELLS, d)
}

fn scan(grid: &EvalGrid, matrix: impl Fn(&[f64]) -> Option<DMatrix<f64>>) -> MarginReport {
    let mut report = MarginReport {
        margin: f64::INFINITY,
        argmin: None,
        skipped: 0,
    };
    for y in grid.points() {
        match matrix(y) {
            Some(h) => {
                let (lam, _) = min_eigen(&h);
                if lam < report.margin {
                    report.margin = lam;
                    report.argmin = Some(y.to_vec());
                }
            }
            None => report.skipped += 1,
        }
    }
    report
}

/// Smallest eigenvalue of `−∇∇ᵀ log f` over the grid.
pub fn logconcavity_margin(m: &GaussianMixture, grid: &EvalGrid) -> MarginReport {
    scan(grid, |y| m.neg_log_hessian(y).ok())
}

/// Smallest eigenvalue of the constraint term alone over the grid.
pub fn constraint_margin(m: &GaussianMixture, grid: &EvalGrid) -> MarginReport {
    scan(grid, |y| m.hessian_terms(y).ok().map(|(_, c)| c))
}

/// Margin over raw parameters with its gradient at the minimizing point.
pub(crate) struct MarginEval {
    pub margin: f64,
    pub skipped: usize,
    pub d_weights: Vec<f64>,
    pub d_means: Vec<f64>,
}

/// Shifted kernel terms at `y`: `ψ_s = exp(−‖y−μ_s‖²/(2q̄) − shift)`, with
/// `ln f(y) = shift + ln Σ π_s ψ_s + ln peak`.
fn shifted_terms(y: &[f64], weights: &[f64], means: &[f64], qbar: f64) -> (Vec<f64>, f64) {
    let d = y.len();
    let logs: Vec<f64> = means
        .chunks_exact(d)
        .map(|mu| {
            -0.5 * y
                .iter()
                .zip(mu)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                / qbar
        })
        .collect();
    let shift = logs
        .iter()
        .zip(weights)
        .filter(|(_, w)| **w > 0.0)
        .map(|(l, _)| *l)
        .fold(f64::NEG_INFINITY, f64::max);
    (logs.iter().map(|l| (l - shift).exp()).collect(), shift)
}

pub(crate) fn margin_eval(
    weights: &[f64],
    means: &[f64],
    qbar: f64,
    grid: &EvalGrid,
    want_gradient: bool,
) -> MarginEval {
    let d = grid.dim();
    let s = weights.len();
    let log_peak = -0.5 * d as f64 * (2.0 * std::f64::consts::PI * qbar).ln();
    let mut best: Option<(f64, usize, DVector<f64>)> = None;
    let mut skipped = 0;
    for (k, y) in grid.points().enumerate() {
        let (psi, shift) = shifted_terms(y, weights, means, qbar);
        let total: f64 = psi.iter().zip(weights).map(|(p, w)| p * w).sum();
        if !(total > 0.0) || shift + total.ln() + log_peak < UNDERFLOW.ln() {
            skipped += 1;
            continue;
        }
        let mut score = DVector::<f64>::zeros(d);
        let mut h = DMatrix::<f64>::zeros(d, d);
        for c in 0..s {
            let r = weights[c] * psi[c] / total;
            if r == 0.0 {
                continue;
            }
            let z = DVector::from_iterator(d, (0..d).map(|j| (y[j] - means[c * d + j]) / qbar));
            score.axpy(r, &z, 1.0);
            h -= r * &z * z.transpose();
            for j in 0..d {
                h[(j, j)] += r / qbar;
            }
        }
        h += &score * score.transpose();
        let h = 0.5 * (&h + h.transpose());
        let (lam, v) = min_eigen(&h);
        if best.as_ref().map_or(true, |b| lam < b.0) {
            best = Some((lam, k, v));
        }
    }
    let Some((margin, k, v)) = best else {
        return MarginEval {
            margin: f64::INFINITY,
            skipped,
            d_weights: vec![0.0; s],
            d_means: vec![0.0; s * d],
        };
    };
    let mut d_weights = vec![0.0; s];
    let mut d_means = vec![0.0; s * d];
    if want_gradient {
        let y = grid.point(k);
        let (psi, _) = shifted_terms(y, weights, means, qbar);
        let a: Vec<f64> = (0..s)
            .map(|c| (0..d).map(|j| v[j] * (y[j] - means[c * d + j])).sum())
            .collect();
        let (mut f, mut g, mut kk) = (0.0, 0.0, 0.0);
        for c in 0..s {
            f += weights[c] * psi[c];
            g += weights[c] * psi[c] * a[c] / qbar;
            kk += weights[c] * psi[c] * (a[c] * a[c] / (qbar * qbar) - 1.0 / qbar);
        }
        // dλ = 2G dG/F² − 2G² dF/F³ − dK/F + K dF/F²
        let cf = -2.0 * g * g / f.powi(3) + kk / (f * f);
        let cg = 2.0 * g / (f * f);
        let ck = -1.0 / f;
        for c in 0..s {
            let dk_term = a[c] * a[c] / (qbar * qbar) - 1.0 / qbar;
            d_weights[c] = cf * psi[c] + cg * psi[c] * a[c] / qbar + ck * psi[c] * dk_term;
            for j in 0..d {
                let z = (y[j] - means[c * d + j]) / qbar;
                let df = weights[c] * psi[c] * z;
                let dg = weights[c] / qbar * psi[c] * (z * a[c] - v[j]);
                let dk = weights[c] * psi[c] * (z * dk_term - 2.0 * a[c] / (qbar * qbar) * v[j]);
                d_means[c * d + j] = cf * df + cg * dg + ck * dk;
            }
        }
    }
    MarginEval {
        margin,
        skipped,
        d_weights,
        d_means,
    }
}

fn penalty_value(weight: f64, margin: f64) -> f64 {
    let v = (-margin).max(0.0);
    weight * v * v
}

struct Objective<'a> {
    problem: &'a Problem<'a>,
    grid: EvalGrid,
    weight: f64,
}

impl Objective<'_> {
    /// `(criterion, penalty, skipped)`.
    fn value(&self, weights: &[f64], means: &[f64]) -> (f64, f64, usize) {
        let crit = self.problem.criterion(weights, means);
        let m = margin_eval(weights, means, self.problem.qbar, &self.grid, false);
        (crit, penalty_value(self.weight, m.margin), m.skipped)
    }

    /// Gradients of criterion + penalty in the weights and the means.
    fn gradient(&self, weights: &[f64], means: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let k = self.problem.kernels(means);
        let mut gw = self.problem.weight_gradient(&k, weights);
        let mut gm = self.problem.mean_gradient(&k, weights, means);
        let m = margin_eval(weights, means, self.problem.qbar, &self.grid, true);
        let violation = (-m.margin).max(0.0);
        if violation > 0.0 {
            let c = -2.0 * self.weight * violation;
            gw.iter_mut()
                .zip(&m.d_weights)
                .for_each(|(g, dm)| *g += c * dm);
            gm.iter_mut()
                .zip(&m.d_means)
                .for_each(|(g, dm)| *g += c * dm);
        }
        (gw, gm)
    }
}

/// Projected-gradient backtracking on one block; returns the accepted point,
/// its objective and step length.
fn armijo_block(
    x: &[f64],
    fx: f64,
    grad: &[f64],
    alpha0: f64,
    project: impl Fn(Vec<f64>) -> Vec<f64>,
    eval: impl Fn(&[f64]) -> f64,
) -> Option<(Vec<f64>, f64, f64)> {
    let mut a = alpha0;
    for _ in 0..80 {
        let trial = project(x.iter().zip(grad).map(|(xi, gi)| xi - a * gi).collect());
        let decrease: f64 = grad
            .iter()
            .zip(trial.iter().zip(x))
            .map(|(g, (t, xi))| g * (t - xi))
            .sum();
        if !(decrease < 0.0) {
            return None;
        }
        let ft = eval(&trial);
        if ft <= fx + 1e-4 * decrease {
            return Some((trial, ft, a));
        }
        a *= 0.5;
    }
    None
}

/// Alternation on criterion + `w · max(0, −margin)²`.
pub(crate) fn alternate(
    problem: &Problem,
    cfg: &ProjectionConfig,
    box_m: f64,
    mut weights: Vec<f64>,
    mut means: Vec<f64>,
    trace: &mut ProjectionTrace,
    start: &Instant,
) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let d = problem.d();
    let obj = Objective {
        problem,
        grid: penalty_grid(box_m, d)?,
        weight: cfg.penalty_weight,
    };
    let total = |w: &[f64], m: &[f64]| {
        let (c, p, _) = obj.value(w, m);
        c + p
    };
    let (c0, p0, skipped) = obj.value(&weights, &means);
    trace.push(c0, p0, start);
    if skipped > 0 {
        trace.flags.push(TraceFlag::PenaltyPointsSkipped {
            iteration: 0,
            count: skipped,
        });
    }
    let mut prev = c0 + p0;
    let mut alpha_w = 1.0_f64;
    let mut alpha_m = 1.0_f64;
    for it in 1..=cfg.max_outer_iters {
        trace.iterations = it;
        // weights: start from the better of the current point and the unpenalized solve
        let phi = design_matrix(problem.sample, &unflatten(&means, d), problem.qbar);
        let qp = solve_weights_from(problem.target, &phi, &weights, cfg.qp_max_iters)?;
        let mut fw = total(&weights, &means);
        let fq = total(&qp.weights, &means);
        if fq < fw {
            weights = qp.weights;
            fw = fq;
        }
        for _ in 0..cfg.max_inner_iters {
            let (gw, _) = obj.gradient(&weights, &means);
            let step = armijo_block(
                &weights,
                fw,
                &gw,
                (2.0 * alpha_w).min(1e12),
                |v| project_simplex(&v),
                |w| total(w, &means),
            );
            let Some((w_new, f_new, a)) = step else { break };
            alpha_w = a;
            let done = fw - f_new <= cfg.inner_rel_tol * fw;
            weights = w_new;
            fw = f_new;
            if done {
                break;
            }
        }
        // means
        let mut fm = fw;
        for _ in 0..cfg.max_inner_iters {
            let (_, gm) = obj.gradient(&weights, &means);
            let step = armijo_block(
                &means,
                fm,
                &gm,
                (2.0 * alpha_m).min(1e12),
                |mut v| {
                    clip(&mut v, box_m);
                    v
                },
                |m| total(&weights, m),
            );
            let Some((m_new, f_new, a)) = step else { break };
            alpha_m = a;
            let done = fm - f_new <= cfg.inner_rel_tol * fm;
            means = m_new;
            fm = f_new;
            if done {
                break;
            }
        }
        let (c, p, skipped) = obj.value(&weights, &means);
        trace.push(c, p, start);
        if skipped > 0 {
            trace.flags.push(TraceFlag::PenaltyPointsSkipped {
                iteration: it,
                count: skipped,
            });
        }
        let now = c + p;
        if prev - now <= cfg.rel_tol * prev {
            trace.converged = true;
            break;
        }
        prev = now;
    }
    let total_w: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total_w);
    Ok((weights, unflatten(&means, d)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn one_point_grid(y: &[f64]) -> EvalGrid {
        let bp = y.iter().map(|v| vec![v - 1e-3, v + 1e-3]).collect();
        EvalGrid::from_breakpoints(bp).unwrap()
    }

    #[test]
    fn single_gaussian_has_positive_margin() {
        let m = GaussianMixture::single(vec![0.5, -0.5], 0.7).unwrap();
        let r = logconcavity_margin(&m, &penalty_grid(3.0, 2).unwrap());
        assert!((r.margin - 1.0 / 0.7).abs() < 1e-12);
        assert_eq!(r.skipped, 0);
    }

    #[test]
    fn separated_components_have_negative_margin() {
        let q: f64 = 0.5;
        let sep = 10.0 * q.sqrt();
        let m = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![-sep / 2.0, 0.0], vec![sep / 2.0, 0.0]],
            q,
            6.0,
        )
        .unwrap();
        let grid = penalty_grid(6.0, 2).unwrap();
        let r = logconcavity_margin(&m, &grid);
        assert!(r.margin < 0.0);
        // finite-difference second derivative of −log f along the axis at the argmin
        let y = r.argmin.clone().unwrap();
        let h = 1e-4;
        let nl = |x: f64| -m.evaluate(&[x, y[1]]).ln();
        let fd = (nl(y[0] + h) - 2.0 * nl(y[0]) + nl(y[0] - h)) / (h * h);
        assert!(fd < 0.0);
    }

    #[test]
    fn constraint_term_bounds_the_margin() {
        let mut rng = crate::seed::rng(31);
        for _ in 0..50 {
            let means: Vec<Vec<f64>> = (0..3)
                .map(|_| vec![rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)])
                .collect();
            let m = GaussianMixture::new(vec![0.2, 0.3, 0.5], means, rng.gen_range(0.3..1.5), 3.0)
                .unwrap();
            let grid = EvalGrid::cube(-3.0, 3.0, 8, 2).unwrap();
            let full = logconcavity_margin(&m, &grid);
            let cons = constraint_margin(&m, &grid);
            assert!(cons.margin <= full.margin + 1e-12);
            // at the argmin the full matrix minus the score term is the constraint term
            let y = full.argmin.unwrap();
            let (score, c) = m.hessian_terms(&y).unwrap();
            let diff = m.neg_log_hessian(&y).unwrap() - score;
            assert!((diff - &c).amax() < 1e-10);
            let (lam_c, _) = min_eigen(&c);
            let (lam_h, _) = min_eigen(&m.neg_log_hessian(&y).unwrap());
            assert!(lam_c <= lam_h + 1e-12);
            if lam_c >= 0.0 {
                assert!(lam_h >= 0.0);
            }
        }
    }

    #[test]
    fn raw_margin_matches_mixture_margin() {
        let m = GaussianMixture::new(
            vec![0.4, 0.6],
            vec![vec![-1.0, 0.0], vec![1.5, 0.5]],
            0.4,
            4.0,
        )
        .unwrap();
        let grid = penalty_grid(4.0, 2).unwrap();
        let flat: Vec<f64> = m.means().iter().flatten().copied().collect();
        let raw = margin_eval(m.weights(), &flat, m.qbar(), &grid, false);
        let reference = logconcavity_margin(&m, &grid);
        assert!((raw.margin - reference.margin).abs() < 1e-9 * reference.margin.abs().max(1.0));
        assert_eq!(raw.skipped, reference.skipped);
    }

    #[test]
    fn margin_gradient_matches_finite_differences() {
        let mut rng = crate::seed::rng(77);
        for _ in 0..30 {
            let s = 3;
            let weights = vec![0.3, 0.3, 0.4];
            let means: Vec<f64> = (0..2 * s).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let qbar = rng.gen_range(0.4..1.2);
            let y = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let grid = one_point_grid(&y);
            let base = margin_eval(&weights, &means, qbar, &grid, true);
            let h = 1e-6;
            let scale = base
                .d_means
                .iter()
                .chain(&base.d_weights)
                .fold(1e-8_f64, |a, v| a.max(v.abs()));
            for k in 0..means.len() {
                let mut up = means.clone();
                up[k] += h;
                let mut dn = means.clone();
                dn[k] -= h;
                let fd = (margin_eval(&weights, &up, qbar, &grid, false).margin
                    - margin_eval(&weights, &dn, qbar, &grid, false).margin)
                    / (2.0 * h);
                assert!(
                    (fd - base.d_means[k]).abs() < 1e-4 * scale,
                    "mean {k}: fd {fd} vs {}",
                    base.d_means[k]
                );
            }
            for k in 0..s {
                let mut up = weights.clone();
                up[k] += h;
                let mut dn = weights.clone();
                dn[k] -= h;
                let fd = (margin_eval(&up, &means, qbar, &grid, false).margin
                    - margin_eval(&dn, &means, qbar, &grid, false).margin)
                    / (2.0 * h);
                assert!(
                    (fd - base.d_weights[k]).abs() < 1e-4 * scale,
                    "weight {k}: fd {fd} vs {}",
                    base.d_weights[k]
                );
            }
        }
    }

    #[test]
    fn refuses_high_dimensions() {
        assert!(penalty_grid(1.0, 3).is_err());
    }
}
