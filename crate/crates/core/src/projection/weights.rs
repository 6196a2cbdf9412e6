//! Least squares over the probability simplex.
//!
//! Minimizes `‖t − Φπ‖²` over `π ∈ Δ^S` with accelerated projected gradient
//! steps of length `1/‖ΦᵀΦ‖`. Every few iterations the equality-constrained
//! system on the current support is solved exactly; when the result is
//! feasible and satisfies the optimality conditions the search stops there.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result};

/// Default iteration cap.
pub const MAX_ITERS: usize = 10_000;

/// Cap for the warm-started solves inside the alternation.
pub const ALTERNATION_ITERS: usize = 1_000;

const POLISH_EVERY: usize = 25;

#[derive(Debug, Clone, PartialEq)]
pub struct WeightsSolution {
    pub weights: Vec<f64>,
    /// `‖t − Φπ‖²` at the returned weights.
    pub objective: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        cum += x;
        let t = (cum - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|x| (x - theta).max(0.0)).collect()
}

/// `‖t − Φπ‖²` computed from the residual.
pub fn residual_norm_sq(target: &[f64], phi: &DMatrix<f64>, weights: &[f64]) -> f64 {
    let fit = phi * DVector::from_column_slice(weights);
    target
        .iter()
        .zip(fit.iter())
        .map(|(t, f)| (t - f) * (t - f))
        .sum()
}

/// Solve from the simplex center.
pub fn solve_weights(target: &[f64], phi: &DMatrix<f64>) -> Result<WeightsSolution> {
    let s = phi.ncols();
    solve_weights_from(target, phi, &vec![1.0 / s as f64; s], MAX_ITERS)
}

/// Solve from a warm start. The returned objective never exceeds the
/// objective at `init` (after projecting `init` onto the simplex).
pub fn solve_weights_from(
    target: &[f64],
    phi: &DMatrix<f64>,
    init: &[f64],
    max_iters: usize,
) -> Result<WeightsSolution> {
    let (n, s) = phi.shape();
    if s == 0 || n != target.len() || init.len() != s {
        return Err(invalid("weights problem has inconsistent dimensions"));
    }
    if phi.iter().chain(target).chain(init).any(|v| !v.is_finite()) {
        return Err(invalid("weights problem has non-finite entries"));
    }
    let start = project_simplex(init);
    if s == 1 {
        return Ok(WeightsSolution {
            objective: residual_norm_sq(target, phi, &start),
            weights: start,
            converged: true,
            iterations: 0,
        });
    }
    let q = phi.transpose() * phi;
    let b = phi.transpose() * DVector::from_column_slice(target);
    let lipschitz = largest_eigenvalue(&q);
    let start_obj = residual_norm_sq(target, phi, &start);
    if !(lipschitz > 0.0) {
        return Ok(WeightsSolution {
            weights: start,
            objective: start_obj,
            converged: true,
            iterations: 0,
        });
    }
    let scale = b.amax().max(lipschitz * 1e-300);
    let tol = 1e-10 * scale;
    // half objective up to the constant tᵀt/2
    let quad = |x: &DVector<f64>| 0.5 * x.dot(&(&q * x)) - b.dot(x);

    let mut x = DVector::from_vec(start.clone());
    let mut y = x.clone();
    let mut t_k = 1.0_f64;
    let mut fx = quad(&x);
    let mut best = (fx, x.clone());
    let mut converged = false;
    let mut iterations = 0;
    for k in 1..=max_iters {
        iterations = k;
        let g = &q * &y - &b;
        let x_new = DVector::from_vec(project_simplex((&y - g / lipschitz).as_slice()));
        let f_new = quad(&x_new);
        if f_new > fx {
            // adaptive restart
            y = x.clone();
            t_k = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t_k * t_k).sqrt());
        y = &x_new + (&x_new - &x) * ((t_k - 1.0) / t_next);
        t_k = t_next;
        x = x_new;
        fx = f_new;
        if fx < best.0 {
            best = (fx, x.clone());
        }
        let gx = &q * &x - &b;
        let mapped = DVector::from_vec(project_simplex((&x - &gx / lipschitz).as_slice()));
        if (&x - mapped).amax() * lipschitz <= tol {
            converged = true;
            break;
        }
        if k % POLISH_EVERY == 0 {
            if let Some(p) = polish(&q, &b, &x, tol) {
                let fp = quad(&p);
                if fp <= best.0 {
                    best = (fp, p);
                    converged = true;
                    break;
                }
            }
        }
    }
    if !converged {
        if let Some(p) = polish(&q, &b, &best.1, tol) {
            if quad(&p) <= best.0 {
                best = (quad(&p), p);
                converged = true;
            }
        }
    }
    let mut weights: Vec<f64> = best.1.iter().map(|v| v.max(0.0)).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    let objective = residual_norm_sq(target, phi, &weights);
    if objective > start_obj {
        return Ok(WeightsSolution {
            weights: start,
            objective: start_obj,
            converged,
            iterations,
        });
    }
    Ok(WeightsSolution {
        weights,
        objective,
        converged,
        iterations,
    })
}

/// Upper bound on the largest eigenvalue of a Gram matrix, tight up to a
/// relative 1e-200. Entries below that scale are flushed before the
/// eigensolve because subnormal inputs make it return non-finite values; the
/// Gershgorin bound is the fallback.
fn largest_eigenvalue(q: &DMatrix<f64>) -> f64 {
    let top = q.amax();
    let floor = 1e-200 * top;
    let clean = q.map(|v| if v.abs() < floor { 0.0 } else { v });
    let eig = clean.symmetric_eigen().eigenvalues;
    if eig.iter().all(|v| v.is_finite()) {
        eig.max().max(q.diagonal().max()) + q.nrows() as f64 * floor
    } else {
        q.row_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Exact minimizer on the support of `x`, accepted only if it is feasible and
/// satisfies the sign conditions off the support.
fn polish(q: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>, tol: f64) -> Option<DVector<f64>> {
    let s = x.len();
    let support: Vec<usize> = (0..s).filter(|&i| x[i] > 1e-14).collect();
    let m = support.len();
    if m == 0 {
        return None;
    }
    let mut kkt = DMatrix::<f64>::zeros(m + 1, m + 1);
    let mut rhs = DVector::<f64>::zeros(m + 1);
    for (a, &i) in support.iter().enumerate() {
        for (c, &j) in support.iter().enumerate() {
            kkt[(a, c)] = q[(i, j)];
        }
        kkt[(a, m)] = 1.0;
        kkt[(m, a)] = 1.0;
        rhs[a] = b[i];
    }
    rhs[m] = 1.0;
    let sol = kkt.lu().solve(&rhs)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let mut p = DVector::<f64>::zeros(s);
    for (a, &i) in support.iter().enumerate() {
        if sol[a] < 0.0 {
            return None;
        }
        p[i] = sol[a];
    }
    let g = q * &p - b;
    let nu = -sol[m];
    if support.iter().any(|&i| (g[i] - nu).abs() > tol) {
        return None;
    }
    if (0..s).any(|i| p[i] == 0.0 && g[i] < nu - tol) {
        return None;
    }
    Some(p)
}
