//! Histograms factorized along a conditional-independence structure.
//!
//! The joint value at `y` is the product over factors of 1-d conditional
//! histograms. A factor `(target | C)` is fitted on the rows whose `C`
//! coordinates fall in the same bins as `y`; an empty conditioning cell
//! contributes zero. All factors share the origin-anchored partition, so the
//! joint is piecewise constant on the product grid.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::histogram::check_widths;
use crate::density::{Density, SquaredNorm};
use crate::error::{invalid, Result};
use crate::sample::Sample;

/// One factor `f(y_target | y_C ∈ B_C)`; indices are 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Factor {
    pub target: usize,
    pub conditioning: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphicalFactorization {
    factors: Vec<Factor>,
}

impl GraphicalFactorization {
    /// Each variable must be a target exactly once, and conditioning sets may
    /// only name targets of earlier factors.
    pub fn new(factors: Vec<Factor>, d: usize) -> Result<Self> {
        let mut seen = vec![false; d];
        for (k, f) in factors.iter().enumerate() {
            if f.target >= d {
                return Err(invalid(format!(
                    "factor {k}: target {} out of range for d = {d}",
                    f.target
                )));
            }
            if seen[f.target] {
                return Err(invalid(format!(
                    "variable {} is a target more than once",
                    f.target
                )));
            }
            for &c in &f.conditioning {
                if c >= d || !seen[c] {
                    return Err(invalid(format!(
                        "factor {k}: conditioning variable {c} is not declared by an earlier factor"
                    )));
                }
            }
            seen[f.target] = true;
        }
        if let Some(j) = seen.iter().position(|s| !s) {
            return Err(invalid(format!("variable {j} is never a target")));
        }
        Ok(GraphicalFactorization { factors })
    }

    /// Fully independent factorization.
    pub fn independent(d: usize) -> Self {
        GraphicalFactorization {
            factors: (0..d)
                .map(|j| Factor {
                    target: j,
                    conditioning: vec![],
                })
                .collect(),
        }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn dim(&self) -> usize {
        self.factors.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
struct CondTable {
    total: usize,
    counts: BTreeMap<i64, usize>,
}

#[derive(Debug, Clone, PartialEq)]
struct FittedFactor {
    target: usize,
    conditioning: Vec<usize>,
    tables: HashMap<Vec<i64>, CondTable>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphicalHistogram {
    widths: Vec<f64>,
    factorization: GraphicalFactorization,
    factors: Vec<FittedFactor>,
}

fn bin(v: f64, h: f64) -> i64 {
    (v / h).floor() as i64
}

impl GraphicalHistogram {
    pub fn fit(
        sample: &Sample,
        factorization: &GraphicalFactorization,
        widths: &[f64],
    ) -> Result<Self> {
        let d = sample.dim();
        check_widths(widths, d)?;
        if factorization.dim() != d {
            return Err(invalid(format!(
                "factorization covers {} variables but the sample has {d}",
                factorization.dim()
            )));
        }
        let factors = factorization
            .factors()
            .iter()
            .map(|f| {
                let mut tables: HashMap<Vec<i64>, CondTable> = HashMap::new();
                for row in sample.rows() {
                    let key: Vec<i64> = f
                        .conditioning
                        .iter()
                        .map(|&c| bin(row[c], widths[c]))
                        .collect();
                    let t = tables.entry(key).or_insert_with(|| CondTable {
                        total: 0,
                        counts: BTreeMap::new(),
                    });
                    t.total += 1;
                    *t.counts
                        .entry(bin(row[f.target], widths[f.target]))
                        .or_insert(0) += 1;
                }
                FittedFactor {
                    target: f.target,
                    conditioning: f.conditioning.clone(),
                    tables,
                }
            })
            .collect();
        Ok(GraphicalHistogram {
            widths: widths.to_vec(),
            factorization: factorization.clone(),
            factors,
        })
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn factorization(&self) -> &GraphicalFactorization {
        &self.factorization
    }

    pub fn evaluate(&self, y: &[f64]) -> f64 {
        let mut value = 1.0;
        for f in &self.factors {
            let key: Vec<i64> = f
                .conditioning
                .iter()
                .map(|&c| bin(y[c], self.widths[c]))
                .collect();
            let Some(t) = f.tables.get(&key) else {
                return 0.0;
            };
            let Some(c) = t.counts.get(&bin(y[f.target], self.widths[f.target])) else {
                return 0.0;
            };
            value *= (*c as f64 / t.total as f64) / self.widths[f.target];
        }
        value
    }

    /// Exact `(∫ f, ∫ f²)` by enumerating the nonzero cells of the product
    /// partition in factor order.
    pub fn exact_moments(&self) -> (f64, f64) {
        let d = self.widths.len();
        let vol: f64 = self.widths.iter().product();
        let mut cell = vec![0i64; d];
        let mut acc = (0.0, 0.0);
        self.enumerate(0, 1.0, &mut cell, &mut acc, vol);
        acc
    }

    fn enumerate(&self, k: usize, value: f64, cell: &mut Vec<i64>, acc: &mut (f64, f64), vol: f64) {
        if k == self.factors.len() {
            acc.0 += value * vol;
            acc.1 += value * value * vol;
            return;
        }
        let f = &self.factors[k];
        let key: Vec<i64> = f.conditioning.iter().map(|&c| cell[c]).collect();
        let Some(t) = f.tables.get(&key) else {
            return;
        };
        for (&b, &c) in &t.counts {
            cell[f.target] = b;
            let v = value * c as f64 / (t.total as f64 * self.widths[f.target]);
            self.enumerate(k + 1, v, cell, acc, vol);
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.exact_moments().0
    }
}

impl Density for GraphicalHistogram {
    fn dim(&self) -> usize {
        self.widths.len()
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl SquaredNorm for GraphicalHistogram {
    fn squared_l2_norm(&self) -> f64 {
        self.exact_moments().1
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pilots::histogram::HistogramEstimate;
    use rand::{Rng, SeedableRng};

    fn uniform(n: usize, d: usize, seed: u64) -> Sample {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..n * d).map(|_| rng.gen::<f64>()).collect();
        Sample::from_flat(data, d).unwrap()
    }

    #[test]
    fn validation() {
        let f = |t, c: Vec<usize>| Factor {
            target: t,
            conditioning: c,
        };
        assert!(GraphicalFactorization::new(vec![f(0, vec![]), f(0, vec![])], 2).is_err());
        assert!(GraphicalFactorization::new(vec![f(0, vec![1]), f(1, vec![])], 2).is_err());
        assert!(GraphicalFactorization::new(vec![f(0, vec![])], 2).is_err());
        assert!(GraphicalFactorization::new(vec![f(2, vec![])], 2).is_err());
        assert!(GraphicalFactorization::new(vec![f(1, vec![]), f(0, vec![1])], 2).is_ok());
    }

    #[test]
    fn independent_factorization_is_product_of_marginals() {
        let s = uniform(300, 2, 4);
        let w = [0.2, 0.25];
        let g = GraphicalHistogram::fit(&s, &GraphicalFactorization::independent(2), &w).unwrap();
        let m0 =
            HistogramEstimate::fit(&Sample::from_flat(s.column(0), 1).unwrap(), &[w[0]], &[0.0])
                .unwrap();
        let m1 =
            HistogramEstimate::fit(&Sample::from_flat(s.column(1), 1).unwrap(), &[w[1]], &[0.0])
                .unwrap();
        for y in [[0.1, 0.1], [0.55, 0.9], [0.99, 0.01], [1.5, 0.5]] {
            let expect = m0.evaluate(&y[..1]) * m1.evaluate(&y[1..]);
            assert!((g.evaluate(&y) - expect).abs() < 1e-12);
        }
        let (mass, _) = g.exact_moments();
        assert!((mass - 1.0).abs() < 1e-12);
    }

    #[test]
    fn one_dimensional_empty_graph_equals_histogram() {
        let s = uniform(50, 1, 9);
        let g =
            GraphicalHistogram::fit(&s, &GraphicalFactorization::independent(1), &[0.1]).unwrap();
        let h = HistogramEstimate::fit(&s, &[0.1], &[0.0]).unwrap();
        for k in 0..200 {
            let x = [-0.25 + k as f64 * 0.0075];
            assert_eq!(g.evaluate(&x), h.evaluate(&x));
        }
        assert!((g.squared_l2_norm() - h.squared_l2_norm()).abs() < 1e-12);
    }

    #[test]
    fn conditional_structure_matches_direct_counting() {
        // Y = (X, X', Z) with X ⊥ X' | Z, ordered Z, X|Z, X'|Z
        let s = uniform(400, 3, 17);
        let w = [0.25, 0.2, 0.5];
        let fact = GraphicalFactorization::new(
            vec![
                Factor {
                    target: 2,
                    conditioning: vec![],
                },
                Factor {
                    target: 0,
                    conditioning: vec![2],
                },
                Factor {
                    target: 1,
                    conditioning: vec![2],
                },
            ],
            3,
        )
        .unwrap();
        let g = GraphicalHistogram::fit(&s, &fact, &w).unwrap();
        let in_bin = |v: f64, y: f64, h: f64| (v / h).floor() == (y / h).floor();
        for y in [[0.1, 0.3, 0.2], [0.6, 0.7, 0.8], [0.9, 0.05, 0.45]] {
            let rows: Vec<&[f64]> = s.rows().filter(|r| in_bin(r[2], y[2], w[2])).collect();
            let nb = rows.len() as f64;
            let fx = rows.iter().filter(|r| in_bin(r[0], y[0], w[0])).count() as f64 / (nb * w[0]);
            let fxp = rows.iter().filter(|r| in_bin(r[1], y[1], w[1])).count() as f64 / (nb * w[1]);
            let p_b = nb / s.n() as f64;
            let expect = fx * fxp * p_b / w[2];
            assert!(
                (g.evaluate(&y) - expect).abs() < 1e-12,
                "{} vs {expect}",
                g.evaluate(&y)
            );
        }
        assert!((g.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn empty_conditioning_cell_gives_zero() {
        let s = Sample::from_rows(&[[0.1, 0.1], [0.2, 0.15]]).unwrap();
        let fact = GraphicalFactorization::new(
            vec![
                Factor {
                    target: 1,
                    conditioning: vec![],
                },
                Factor {
                    target: 0,
                    conditioning: vec![1],
                },
            ],
            2,
        )
        .unwrap();
        let g = GraphicalHistogram::fit(&s, &fact, &[0.5, 0.5]).unwrap();
        assert_eq!(g.evaluate(&[0.1, 3.0]), 0.0);
        assert!(g.evaluate(&[0.1, 0.1]) > 0.0);
    }

    #[test]
    fn moments_match_midpoint_quadrature() {
        let s = uniform(200, 2, 5);
        let fact = GraphicalFactorization::new(
            vec![
                Factor {
                    target: 0,
                    conditioning: vec![],
                },
                Factor {
                    target: 1,
                    conditioning: vec![0],
                },
            ],
            2,
        )
        .unwrap();
        let g = GraphicalHistogram::fit(&s, &fact, &[0.25, 0.2]).unwrap();
        // grid aligned with the partition: 5 subcells per bin
        let bp = |h: f64| (0..=40).map(|k| k as f64 * h / 5.0).collect::<Vec<_>>();
        let grid = crate::grid::EvalGrid::from_breakpoints(vec![bp(0.25), bp(0.2)]).unwrap();
        let (m1, m2) = g.exact_moments();
        let q2: f64 =
            grid.points().map(|p| g.evaluate(p).powi(2)).sum::<f64>() * grid.cell_volume();
        assert!((g.integrate_on(&grid) - m1).abs() < 1e-12);
        assert!((q2 - m2).abs() < 1e-10);
    }
}
