//! Least-squares projection of a pilot density onto spherical Gaussian
//! mixtures.
//!
//! The pilot is evaluated at the data, giving a target vector `t`. The
//! estimator minimizes `(1/n) Σ_i (t_i − Σ_s π_s φ(Y_i; μ_s, q̄I))²` over the
//! simplex and the box by alternating an exact weights solve with a descent
//! in the means.

mod init;
mod means;
mod penalty;
mod weights;

use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use init::{grid_means, grid_means_in};
pub use means::{criterion, design_matrix, mean_gradient, solve_means, MeanSolver, MeansSolution};
pub use penalty::{
    constraint_margin, logconcavity_margin, penalty_grid, MarginReport, PENALTY_CELLS,
};
pub use weights::{
    project_simplex, residual_norm_sq, solve_weights, solve_weights_from, WeightsSolution,
};

use crate::error::{invalid, Result};
use crate::mixture::GaussianMixture;
use crate::pilots::PilotDensity;
use crate::sample::{fmt_f64, Sample};
use means::{flatten, Problem};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionConfig {
    /// Number of mixture components `S`.
    pub components: usize,
    pub qbar: f64,
    /// Box half-width `M`; the data-driven default is used when absent.
    pub box_m: Option<f64>,
    pub max_outer_iters: usize,
    pub rel_tol: f64,
    pub mean_solver: MeanSolver,
    pub penalty_weight: f64,
    pub max_inner_iters: usize,
    pub inner_rel_tol: f64,
    pub qp_max_iters: usize,
    pub init: MeanInit,
}

/// Where the initial grid of means is laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeanInit {
    /// The whole box `[-M, M]^d`.
    #[default]
    Box,
    /// The coordinatewise range of the data, clipped to the box.
    DataHull,
}

impl Default for ProjectionConfig {
    fn default() -> Self {
        ProjectionConfig::new(36, 0.7)
    }
}

impl ProjectionConfig {
    pub fn new(components: usize, qbar: f64) -> Self {
        ProjectionConfig {
            components,
            qbar,
            box_m: None,
            max_outer_iters: 200,
            rel_tol: 1e-8,
            mean_solver: MeanSolver::ProjectedGradient,
            penalty_weight: 0.0,
            max_inner_iters: 100,
            inner_rel_tol: 1e-10,
            qp_max_iters: weights::ALTERNATION_ITERS,
            init: MeanInit::Box,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.components == 0 {
            return Err(invalid("S must be at least 1"));
        }
        if !(self.qbar > 0.0 && self.qbar.is_finite()) {
            return Err(invalid(format!("qbar must be positive, got {}", self.qbar)));
        }
        if let Some(m) = self.box_m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(invalid(format!("box half-width must be positive, got {m}")));
            }
        }
        if !(self.rel_tol > 0.0) || !(self.inner_rel_tol > 0.0) {
            return Err(invalid("tolerances must be positive"));
        }
        if !(self.penalty_weight >= 0.0 && self.penalty_weight.is_finite()) {
            return Err(invalid(format!(
                "penalty weight must be nonnegative, got {}",
                self.penalty_weight
            )));
        }
        if self.max_outer_iters == 0 || self.max_inner_iters == 0 || self.qp_max_iters == 0 {
            return Err(invalid("iteration caps must be positive"));
        }
        Ok(())
    }

    /// The configured box or `max|Y| + 3√q̄`.
    pub fn resolved_box(&self, sample: &Sample) -> f64 {
        self.box_m
            .unwrap_or_else(|| GaussianMixture::default_box(sample, self.qbar))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TraceFlag {
    WeightsNotConverged {
        iteration: usize,
    },
    FrozenComponent {
        iteration: usize,
        component: usize,
    },
    /// Penalty-grid points skipped because the mixture underflows there.
    PenaltyPointsSkipped {
        iteration: usize,
        count: usize,
    },
}

/// Per-iteration record of an alternation run. Entry 0 is the starting
/// point; entry `k` follows outer iteration `k`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ProjectionTrace {
    pub criterion: Vec<f64>,
    pub penalty: Vec<f64>,
    pub wall_ms: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub flags: Vec<TraceFlag>,
}

impl ProjectionTrace {
    fn push(&mut self, criterion: f64, penalty: f64, start: &Instant) {
        self.criterion.push(criterion);
        self.penalty.push(penalty);
        self.wall_ms.push(start.elapsed().as_secs_f64() * 1e3);
    }

    /// Criterion plus penalty at each entry.
    pub fn objective(&self) -> Vec<f64> {
        self.criterion
            .iter()
            .zip(&self.penalty)
            .map(|(c, p)| c + p)
            .collect()
    }

    pub fn final_criterion(&self) -> f64 {
        *self.criterion.last().expect("trace has a starting entry")
    }

    /// Whether each step of the objective rises by at most `tol`.
    pub fn is_monotone(&self, tol: f64) -> bool {
        self.objective().windows(2).all(|w| w[1] <= w[0] + tol)
    }

    /// CSV with header `iteration,criterion,penalty,wall_ms`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,criterion,penalty,wall_ms\n");
        for k in 0..self.criterion.len() {
            out.push_str(&format!(
                "{k},{},{},{}\n",
                fmt_f64(self.criterion[k]),
                fmt_f64(self.penalty[k]),
                fmt_f64(self.wall_ms[k])
            ));
        }
        out
    }
}

/// Projection of a pilot density evaluated at the data.
pub fn project(
    pilot: &PilotDensity,
    sample: &Sample,
    cfg: &ProjectionConfig,
) -> Result<(GaussianMixture, ProjectionTrace)> {
    if pilot.kind() != crate::pilots::PilotKind::Tabulated {
        use crate::density::Density;
        if pilot.dim() != sample.dim() {
            return Err(invalid("pilot and sample dimensions differ"));
        }
    }
    project_target(&pilot.evaluate_at(sample), sample, cfg)
}

/// Projection of the `1/n`-weighted point masses: every target value is `1/n`.
pub fn direct_project(
    sample: &Sample,
    cfg: &ProjectionConfig,
) -> Result<(GaussianMixture, ProjectionTrace)> {
    project_target(&vec![sample.weight(); sample.n()], sample, cfg)
}

/// Projection with a log-concavity violation penalty. A zero weight takes
/// exactly the unpenalized path.
pub fn penalized_project(
    pilot: &PilotDensity,
    sample: &Sample,
    cfg: &ProjectionConfig,
) -> Result<(GaussianMixture, ProjectionTrace)> {
    project(pilot, sample, cfg)
}

/// Alternating projection onto a target vector of values at the data.
pub fn project_target(
    target: &[f64],
    sample: &Sample,
    cfg: &ProjectionConfig,
) -> Result<(GaussianMixture, ProjectionTrace)> {
    cfg.validate()?;
    if cfg.components > sample.n() + 1 {
        return Err(invalid(format!(
            "S = {} exceeds n + 1 = {}",
            cfg.components,
            sample.n() + 1
        )));
    }
    if target.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
        return Err(invalid("target values must be finite and nonnegative"));
    }
    let start = Instant::now();
    let box_m = cfg.resolved_box(sample);
    let d = sample.dim();
    let s = cfg.components;
    let problem = Problem::new(target, sample, cfg.qbar)?;
    let means0 = match cfg.init {
        MeanInit::Box => grid_means(s, d, box_m)?,
        MeanInit::DataHull => {
            let (lo, hi): (Vec<f64>, Vec<f64>) = sample
                .bounds()
                .into_iter()
                .map(|(a, b)| (a.clamp(-box_m, box_m), b.clamp(-box_m, box_m)))
                .unzip();
            grid_means_in(s, &lo, &hi)?
        }
    };
    let weights0 = vec![1.0 / s as f64; s];
    let mut trace = ProjectionTrace::default();

    let (weights, means) = if cfg.penalty_weight > 0.0 {
        penalty::alternate(
            &problem,
            cfg,
            box_m,
            weights0,
            flatten(&means0),
            &mut trace,
            &start,
        )?
    } else {
        let mut weights = weights0;
        let mut means = means0;
        let mut prev = problem.criterion(&weights, &flatten(&means));
        trace.push(prev, 0.0, &start);
        for it in 1..=cfg.max_outer_iters {
            trace.iterations = it;
            let phi = design_matrix(sample, &means, cfg.qbar);
            let ws = solve_weights_from(target, &phi, &weights, cfg.qp_max_iters)?;
            if !ws.converged {
                trace
                    .flags
                    .push(TraceFlag::WeightsNotConverged { iteration: it });
            }
            weights = ws.weights;
            let ms = solve_means(target, sample, &weights, &means, cfg)?;
            for c in ms.frozen {
                trace.flags.push(TraceFlag::FrozenComponent {
                    iteration: it,
                    component: c,
                });
            }
            means = ms.means;
            let crit = problem.criterion(&weights, &flatten(&means));
            trace.push(crit, 0.0, &start);
            if prev - crit <= cfg.rel_tol * prev {
                trace.converged = true;
                break;
            }
            prev = crit;
        }
        (weights, means)
    };
    let mixture = GaussianMixture::new(weights, means, cfg.qbar, box_m)?;
    Ok((mixture, trace))
}
