//! Integrated squared error by quadrature or Monte Carlo.

use serde::{Deserialize, Serialize};

use crate::datagen::TrueDensity;
use crate::density::{Density, SquaredNorm};
use crate::error::{invalid, Result};
use crate::grid::EvalGrid;
use crate::mixture::GaussianMixture;
use crate::pilots::PilotDensity;
use crate::sample::Sample;
use crate::seed;

/// Boundary cells carrying more than this much mass trigger a warning.
pub const BOUNDARY_MASS_TOL: f64 = 1e-3;

/// Cells per axis of the default quadrature grid.
pub const DEFAULT_GRID_CELLS: usize = 256;

/// Draws used by the default Monte-Carlo ISE.
pub const DEFAULT_MC_DRAWS: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridIse {
    pub ise: f64,
    /// Mass of each density in the outermost layer of cells.
    pub boundary_mass: [f64; 2],
    pub boundary_warning: bool,
}

/// Midpoint Riemann sum of `(f̂ − f₀)²` over the grid.
pub fn ise_grid(f_hat: &dyn Density, f_true: &dyn Density, grid: &EvalGrid) -> Result<GridIse> {
    if f_true.dim() != grid.dim() {
        return Err(invalid("density and grid dimensions differ"));
    }
    grid_sum(f_hat, grid, |_, p| f_true.density(p))
}

fn grid_sum(
    f_hat: &dyn Density,
    grid: &EvalGrid,
    truth_at: impl Fn(usize, &[f64]) -> f64,
) -> Result<GridIse> {
    if f_hat.dim() != grid.dim() {
        return Err(invalid("density and grid dimensions differ"));
    }
    let mut sum = 0.0;
    let mut boundary = [0.0, 0.0];
    for (k, p) in grid.points().enumerate() {
        let a = f_hat.density(p);
        let b = truth_at(k, p);
        sum += (a - b) * (a - b);
        if grid.is_boundary_cell(k) {
            boundary[0] += a;
            boundary[1] += b;
        }
    }
    let vol = grid.cell_volume();
    let boundary_mass = [boundary[0] * vol, boundary[1] * vol];
    let boundary_warning = boundary_mass.iter().any(|m| *m > BOUNDARY_MASS_TOL);
    if boundary_warning {
        log::warn!(
            "ISE grid boundary carries mass {boundary_mass:?}; the grid may truncate a density"
        );
    }
    Ok(GridIse {
        ise: sum * vol,
        boundary_mass,
        boundary_warning,
    })
}

/// A truth evaluated once on a quadrature grid, for repeated grid ISEs.
#[derive(Debug, Clone)]
pub struct TruthTable {
    grid: EvalGrid,
    values: Vec<f64>,
}

impl TruthTable {
    pub fn new(f_true: &dyn Density, grid: EvalGrid) -> Result<Self> {
        if f_true.dim() != grid.dim() {
            return Err(invalid("density and grid dimensions differ"));
        }
        let values = grid.points().map(|p| f_true.density(p)).collect();
        Ok(TruthTable { grid, values })
    }

    pub fn grid(&self) -> &EvalGrid {
        &self.grid
    }

    /// Same value as [`ise_grid`] against the tabulated truth.
    pub fn ise(&self, f_hat: &dyn Density) -> Result<GridIse> {
        grid_sum(f_hat, &self.grid, |k, _| self.values[k])
    }
}

/// Default ISE grid for a bivariate or univariate truth.
pub fn default_ise_grid(truth: &TrueDensity) -> Result<EvalGrid> {
    if truth.dim() > 2 {
        return Err(invalid(
            "grid ISE is limited to d ≤ 2; use the Monte-Carlo estimate",
        ));
    }
    let (lo, hi) = truth.ise_box();
    EvalGrid::regular(&lo, &hi, &vec![DEFAULT_GRID_CELLS; truth.dim()])
}

/// Densities that can be sampled and have a closed-form `∫ f²`.
pub trait Truth: SquaredNorm {
    fn draw(&self, rng: &mut seed::Rng, count: usize) -> Sample;
}

impl Truth for TrueDensity {
    fn draw(&self, rng: &mut seed::Rng, count: usize) -> Sample {
        self.sample_with(rng, count)
    }
}

impl Truth for GaussianMixture {
    fn draw(&self, rng: &mut seed::Rng, count: usize) -> Sample {
        self.sample_with(rng, count)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McIse {
    pub ise: f64,
    pub stderr: f64,
}

/// `∫ f̂² + ∫ f₀² − 2 E₀[f̂(X)]`, with both squared norms in closed form and
/// the cross term averaged over `count` draws from the truth.
pub fn ise_mc<H: SquaredNorm + ?Sized, T: Truth + ?Sized>(
    f_hat: &H,
    truth: &T,
    count: usize,
    seed: u64,
) -> Result<McIse> {
    ise_mc_with_norm(f_hat, f_hat.squared_l2_norm(), truth, count, seed)
}

/// Monte-Carlo ISE of a pilot; tabulated pilots have no closed-form norm and
/// are rejected.
pub fn ise_mc_pilot<T: Truth + ?Sized>(
    pilot: &PilotDensity,
    truth: &T,
    count: usize,
    seed: u64,
) -> Result<McIse> {
    ise_mc_with_norm(pilot, pilot.squared_l2_norm()?, truth, count, seed)
}

fn ise_mc_with_norm<H: Density + ?Sized, T: Truth + ?Sized>(
    f_hat: &H,
    hat_sq: f64,
    truth: &T,
    count: usize,
    seed: u64,
) -> Result<McIse> {
    if count < 2 {
        return Err(invalid("Monte-Carlo ISE needs at least two draws"));
    }
    if f_hat.dim() != truth.dim() {
        return Err(invalid("estimate and truth dimensions differ"));
    }
    let draws = truth.draw(&mut seed::rng(seed), count);
    let vals: Vec<f64> = draws.rows().map(|x| f_hat.density(x)).collect();
    let n = count as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    Ok(McIse {
        ise: hat_sq + truth.squared_l2_norm() - 2.0 * mean,
        stderr: 2.0 * (var / n).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::make_scenario_i;

    fn normal(mu: f64) -> GaussianMixture {
        GaussianMixture::single(vec![mu], 1.0).unwrap()
    }

    #[test]
    fn tabulated_truth_matches_direct_quadrature() {
        let grid = EvalGrid::regular(&[-6.0, -6.0], &[6.0, 6.0], &[64, 64]).unwrap();
        let a = GaussianMixture::single(vec![0.0, 0.5], 1.0).unwrap();
        let b = GaussianMixture::new(
            vec![0.3, 0.7],
            vec![vec![-1.0, 0.0], vec![1.0, 1.0]],
            0.8,
            3.0,
        )
        .unwrap();
        let direct = ise_grid(&a, &b, &grid).unwrap();
        let table = TruthTable::new(&b, grid).unwrap().ise(&a).unwrap();
        assert_eq!(direct, table);
    }

    #[test]
    fn identical_densities_have_zero_error() {
        let g = EvalGrid::cube(-8.0, 8.0, 256, 1).unwrap();
        assert_eq!(ise_grid(&normal(0.3), &normal(0.3), &g).unwrap().ise, 0.0);
    }

    #[test]
    fn gaussian_overlap_closed_form() {
        let g = EvalGrid::cube(-12.0, 14.0, 4096, 1).unwrap();
        let phi_sqrt2 = |x: f64| (-x * x / 4.0).exp() / (4.0 * std::f64::consts::PI).sqrt();
        for mu in [0.0, 0.5, 1.0, 2.0] {
            let r = ise_grid(&normal(0.0), &normal(mu), &g).unwrap();
            let exact = 2.0 * phi_sqrt2(0.0) - 2.0 * phi_sqrt2(mu);
            assert!((r.ise - exact).abs() < 1e-6);
            assert!(!r.boundary_warning);
        }
    }

    #[test]
    fn symmetric_and_refinement_stable() {
        let a = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![1.0, 1.0]],
            0.5,
            3.0,
        )
        .unwrap();
        let b = GaussianMixture::single(vec![0.4, 0.2], 0.8).unwrap();
        let g1 = EvalGrid::cube(-7.0, 8.0, 200, 2).unwrap();
        let g2 = EvalGrid::cube(-7.0, 8.0, 400, 2).unwrap();
        let ab = ise_grid(&a, &b, &g1).unwrap().ise;
        assert_eq!(ab, ise_grid(&b, &a, &g1).unwrap().ise);
        assert!((ab - ise_grid(&a, &b, &g2).unwrap().ise).abs() < 1e-6);
    }

    #[test]
    fn truncating_grid_warns() {
        let g = EvalGrid::cube(-1.0, 1.0, 64, 1).unwrap();
        assert!(
            ise_grid(&normal(0.0), &normal(0.5), &g)
                .unwrap()
                .boundary_warning
        );
    }

    #[test]
    fn in_class_mc_error_is_zero() {
        let m = GaussianMixture::new(
            vec![0.3, 0.7],
            vec![vec![0.0, 1.0], vec![2.0, -1.0]],
            0.6,
            3.0,
        )
        .unwrap();
        let r = ise_mc(&m, &m, 100_000, 3).unwrap();
        assert!(r.ise.abs() <= 3.0 * r.stderr, "{r:?}");
    }

    #[test]
    fn mc_agrees_with_grid_on_scenario_i() {
        let truth = make_scenario_i();
        let hat = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.5, 1.8], vec![-1.0, 1.0]],
            1.2,
            5.0,
        )
        .unwrap();
        let grid = default_ise_grid(&truth).unwrap();
        let g = ise_grid(&hat, &truth, &grid).unwrap();
        let mc = ise_mc(&hat, &truth, DEFAULT_MC_DRAWS, 11).unwrap();
        assert!(
            (g.ise - mc.ise).abs() <= 3.0 * mc.stderr,
            "grid {} mc {:?}",
            g.ise,
            mc
        );
    }

    #[test]
    fn mixture_norm_matches_quadrature() {
        let m = GaussianMixture::new(
            vec![0.2, 0.8],
            vec![vec![-1.0, 0.5], vec![1.0, 0.0]],
            0.4,
            3.0,
        )
        .unwrap();
        let g = EvalGrid::cube(-6.0, 6.0, 400, 2).unwrap();
        let q: f64 = g.points().map(|p| m.evaluate(p).powi(2)).sum::<f64>() * g.cell_volume();
        assert!((q - m.squared_l2_norm()).abs() < 1e-6);
    }
}
