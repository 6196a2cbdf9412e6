//! Probability mass of mixtures over regions.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::density::{std_normal_cdf, Density};
use crate::error::{invalid, Result};
use crate::grid::EvalGrid;
use crate::mixture::GaussianMixture;
use crate::seed;

#[derive(Debug, Clone)]
pub enum Region {
    /// Axis-aligned box; infinite bounds allowed.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Euclidean ball, integrated by Monte Carlo.
    Ball {
        center: Vec<f64>,
        radius: f64,
        draws: usize,
        seed: u64,
    },
    /// Union of the selected cells of a grid.
    Cells { grid: EvalGrid, mask: Vec<bool> },
}

impl Region {
    /// `R^d` as an unbounded box.
    pub fn everything(d: usize) -> Region {
        Region::Box {
            lo: vec![f64::NEG_INFINITY; d],
            hi: vec![f64::INFINITY; d],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionMass {
    pub mass: f64,
    /// Monte-Carlo standard error; zero for exact evaluations.
    pub stderr: f64,
}

/// `Σ_s π_s P(N(μ_s, q̄I) ∈ region)`.
pub fn mass_in_region(m: &GaussianMixture, region: &Region) -> Result<RegionMass> {
    let d = m.dim();
    match region {
        Region::Box { lo, hi } => {
            if lo.len() != d || hi.len() != d {
                return Err(invalid("region dimension differs from the mixture"));
            }
            Ok(RegionMass {
                mass: m.box_mass(lo, hi).clamp(0.0, 1.0),
                stderr: 0.0,
            })
        }
        Region::Ball {
            center,
            radius,
            draws,
            seed,
        } => {
            if center.len() != d || !(*radius >= 0.0) || *draws < 2 {
                return Err(invalid(
                    "ball needs a matching center, radius ≥ 0 and at least two draws",
                ));
            }
            let sample = m.sample_with(&mut seed::rng(*seed), *draws);
            let r2 = radius * radius;
            let hits = sample
                .rows()
                .filter(|x| {
                    x.iter()
                        .zip(center)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum::<f64>()
                        <= r2
                })
                .count();
            let p = hits as f64 / *draws as f64;
            Ok(RegionMass {
                mass: p,
                stderr: (p * (1.0 - p) / *draws as f64).sqrt(),
            })
        }
        Region::Cells { grid, mask } => {
            if grid.dim() != d || mask.len() != grid.len() {
                return Err(invalid("cell mask does not match the grid"));
            }
            // per-axis CDF tables at the breakpoints, one per component
            let sd = m.qbar().sqrt();
            let shape = grid.shape();
            let tables: Vec<Vec<Vec<f64>>> = m
                .means()
                .iter()
                .map(|mu| {
                    grid.breakpoints()
                        .iter()
                        .enumerate()
                        .map(|(j, b)| b.iter().map(|v| std_normal_cdf((v - mu[j]) / sd)).collect())
                        .collect()
                })
                .collect();
            let mut total = 0.0;
            let mut idx = vec![0usize; d];
            for k in 0..grid.len() {
                let mut rem = k;
                for j in (0..d).rev() {
                    idx[j] = rem % shape[j];
                    rem /= shape[j];
                }
                if !mask[k] {
                    continue;
                }
                for (w, t) in m.weights().iter().zip(&tables) {
                    let mut p = *w;
                    for j in 0..d {
                        p *= (t[j][idx[j] + 1] - t[j][idx[j]]).max(0.0);
                    }
                    total += p;
                }
            }
            Ok(RegionMass {
                mass: total.clamp(0.0, 1.0),
                stderr: 0.0,
            })
        }
    }
}

/// Highest-density cells of `truth` on `grid` whose midpoint-rule mass first
/// reaches `level` (ties by grid order).
pub fn highest_density_cells(truth: &dyn Density, grid: &EvalGrid, level: f64) -> Result<Region> {
    if !(level > 0.0 && level <= 1.0) {
        return Err(invalid(format!("level must lie in (0, 1], got {level}")));
    }
    let vol = grid.cell_volume();
    let vals: Vec<f64> = grid.points().map(|p| truth.density(p)).collect();
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|a, b| vals[*b].partial_cmp(&vals[*a]).expect("finite density"));
    let mut mask = vec![false; vals.len()];
    let mut acc = 0.0;
    for k in order {
        if acc >= level {
            break;
        }
        mask[k] = true;
        acc += vals[k] * vol;
    }
    if acc < level {
        return Err(invalid(format!(
            "grid holds only {acc} of the mass, below {level}"
        )));
    }
    Ok(Region::Cells {
        grid: grid.clone(),
        mask,
    })
}

/// The central half-mass region of a bivariate truth.
pub fn half_mass_region(truth: &dyn Density, grid: &EvalGrid) -> Result<Region> {
    highest_density_cells(truth, grid, 0.5)
}

/// Draw-based estimate of a box mass, used to cross-check the closed form.
pub fn box_mass_mc(
    m: &GaussianMixture,
    lo: &[f64],
    hi: &[f64],
    draws: usize,
    seed: u64,
) -> RegionMass {
    let mut rng = seed::rng(seed);
    let sd = m.qbar().sqrt();
    let pick = rand::distributions::WeightedIndex::new(m.weights()).expect("simplex weights");
    let mut hits = 0usize;
    for _ in 0..draws {
        let mu = &m.means()[rand::distributions::Distribution::sample(&pick, &mut rng)];
        let inside = mu.iter().enumerate().all(|(j, c)| {
            let x = c + sd * rng.sample::<f64, _>(StandardNormal);
            x >= lo[j] && x <= hi[j]
        });
        if inside {
            hits += 1;
        }
    }
    let p = hits as f64 / draws as f64;
    RegionMass {
        mass: p,
        stderr: (p * (1.0 - p) / draws as f64).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::make_scenario_ii;

    #[test]
    fn whole_space_has_unit_mass() {
        let m = GaussianMixture::new(
            vec![0.3, 0.7],
            vec![vec![1.0, 0.0], vec![-2.0, 2.0]],
            0.5,
            3.0,
        )
        .unwrap();
        assert!((mass_in_region(&m, &Region::everything(2)).unwrap().mass - 1.0).abs() < 1e-15);
    }

    #[test]
    fn gaussian_quantile_box() {
        let q: f64 = 0.8;
        let m = GaussianMixture::single(vec![0.4], q).unwrap();
        let h = 1.959_963_984_540_054 * q.sqrt();
        let r = mass_in_region(
            &m,
            &Region::Box {
                lo: vec![0.4 - h],
                hi: vec![0.4 + h],
            },
        )
        .unwrap();
        assert!((r.mass - 0.95).abs() < 1e-4);
    }

    #[test]
    fn box_matches_monte_carlo() {
        let m = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![1.5, -0.5]],
            0.7,
            3.0,
        )
        .unwrap();
        let (lo, hi) = (vec![-0.5, -1.0], vec![1.0, 0.8]);
        let exact = mass_in_region(
            &m,
            &Region::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
        )
        .unwrap()
        .mass;
        let mc = box_mass_mc(&m, &lo, &hi, 1_000_000, 4);
        assert!((exact - mc.mass).abs() <= 3.0 * mc.stderr, "{exact} {mc:?}");
    }

    #[test]
    fn monotone_under_inclusion() {
        let m = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![1.5, -0.5]],
            0.7,
            3.0,
        )
        .unwrap();
        let small = mass_in_region(
            &m,
            &Region::Box {
                lo: vec![-0.5, -0.5],
                hi: vec![0.5, 0.5],
            },
        )
        .unwrap()
        .mass;
        let big = mass_in_region(
            &m,
            &Region::Box {
                lo: vec![-1.0, -0.5],
                hi: vec![0.5, 1.5],
            },
        )
        .unwrap()
        .mass;
        assert!(small <= big);
        let b1 = mass_in_region(
            &m,
            &Region::Ball {
                center: vec![0.0, 0.0],
                radius: 1.0,
                draws: 50_000,
                seed: 1,
            },
        )
        .unwrap();
        let b2 = mass_in_region(
            &m,
            &Region::Ball {
                center: vec![0.0, 0.0],
                radius: 2.0,
                draws: 50_000,
                seed: 1,
            },
        )
        .unwrap();
        assert!(b1.mass <= b2.mass);
    }

    #[test]
    fn ball_for_single_gaussian() {
        // squared radius over q̄ is χ²₂, so P(‖X − μ‖ ≤ r) = 1 − exp(−r²/(2q̄))
        let m = GaussianMixture::single(vec![1.0, -1.0], 0.5).unwrap();
        let r = mass_in_region(
            &m,
            &Region::Ball {
                center: vec![1.0, -1.0],
                radius: 1.0,
                draws: 200_000,
                seed: 2,
            },
        )
        .unwrap();
        let exact = 1.0 - (-1.0_f64).exp();
        assert!((r.mass - exact).abs() <= 3.0 * r.stderr);
    }

    #[test]
    fn cell_mass_matches_box_sums() {
        let m = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![0.0, 0.0], vec![1.5, -0.5]],
            0.7,
            3.0,
        )
        .unwrap();
        let grid = EvalGrid::cube(-3.0, 3.0, 12, 2).unwrap();
        let mask: Vec<bool> = (0..grid.len()).map(|k| k % 3 == 0).collect();
        let direct: f64 = (0..grid.len())
            .filter(|k| mask[*k])
            .map(|k| {
                let (lo, hi) = grid.cell_bounds(k);
                m.box_mass(&lo, &hi)
            })
            .sum();
        let r = mass_in_region(&m, &Region::Cells { grid, mask }).unwrap();
        assert!((r.mass - direct).abs() < 1e-13);
    }

    #[test]
    fn half_mass_region_of_gamma_truth() {
        let t = make_scenario_ii();
        let grid = EvalGrid::cube(0.0, 16.0, 256, 2).unwrap();
        let Region::Cells { mask, .. } = half_mass_region(&t, &grid).unwrap() else {
            panic!()
        };
        let vol = grid.cell_volume();
        let mass: f64 = (0..grid.len())
            .filter(|k| mask[*k])
            .map(|k| t.evaluate(grid.point(k)) * vol)
            .sum();
        assert!(mass >= 0.5 && mass < 0.5 + 0.01);
        // the mode (1, 1) is inside
        let k = grid
            .points()
            .position(|p| (p[0] - 1.0).abs() < 0.04 && (p[1] - 1.0).abs() < 0.04)
            .unwrap();
        assert!(mask[k]);
    }
}
