//! Seeded generators for the simulation truths.
//!
//! * `normal-mix`: two bivariate normals with full covariances.
//! * `gamma-indep`: independent `Γ(2, 1)` coordinates.
//! * `ring`: 500 equal-weight spherical normals (scale 0.7) centered on the
//!   radius-4 circle.
//! * `ggm5`: a zero-mean 5-d Gaussian graphical model given by its precision
//!   matrix.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::density::{Density, SquaredNorm};
use crate::error::{invalid, Error, Result};
use crate::mixture::GaussianMixture;
use crate::pilots::{Factor, GraphicalFactorization};
use crate::sample::Sample;
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    NormalMix,
    GammaIndep,
    Ring,
    Ggm5,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::NormalMix,
        Scenario::GammaIndep,
        Scenario::Ring,
        Scenario::Ggm5,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Scenario::NormalMix => "normal-mix",
            Scenario::GammaIndep => "gamma-indep",
            Scenario::Ring => "ring",
            Scenario::Ggm5 => "ggm5",
        }
    }

    pub fn truth(self) -> TrueDensity {
        match self {
            Scenario::NormalMix => make_scenario_i(),
            Scenario::GammaIndep => make_scenario_ii(),
            Scenario::Ring => make_scenario_iii(),
            Scenario::Ggm5 => make_ggm5(),
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|c| c.label() == s)
            .ok_or_else(|| {
                invalid(format!(
                    "unknown scenario `{s}` (expected normal-mix, gamma-indep, ring or ggm5)"
                ))
            })
    }
}

/// Multivariate normal with a precomputed Cholesky factor.
#[derive(Debug, Clone)]
struct Mvn {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: DMatrix<f64>,
    prec: DMatrix<f64>,
    log_norm: f64,
}

impl Mvn {
    fn new(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| invalid("covariance is not positive definite"))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        let prec = chol.inverse();
        Ok(Mvn {
            mean: DVector::from_vec(mean),
            cov,
            chol: l,
            prec,
            log_norm: -0.5 * (d as f64 * (2.0 * PI).ln() + log_det),
        })
    }

    fn pdf(&self, x: &[f64]) -> f64 {
        let z = DVector::from_column_slice(x) - &self.mean;
        (self.log_norm - 0.5 * z.dot(&(&self.prec * &z))).exp()
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut Vec<f64>) {
        let d = self.mean.len();
        let z = DVector::from_iterator(d, (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)));
        out.extend((&self.chol * z + &self.mean).iter());
    }

    /// `∫ φ_a φ_b = φ(μ_a − μ_b; 0, Σ_a + Σ_b)`.
    fn overlap(&self, other: &Mvn) -> f64 {
        let joint = Mvn::new(vec![0.0; self.mean.len()], &self.cov + &other.cov)
            .expect("sum of SPD matrices");
        joint.pdf((&self.mean - &other.mean).as_slice())
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Normal(Vec<(f64, Mvn)>),
    Gamma,
    Spherical(GaussianMixture),
}

/// A simulation truth with exact evaluation and seeded sampling.
#[derive(Debug, Clone)]
pub struct TrueDensity {
    scenario: Scenario,
    dim: usize,
    kind: Kind,
}

/// Two-component bivariate normal mixture with full covariances.
pub fn make_scenario_i() -> TrueDensity {
    let c1 = DMatrix::from_row_slice(2, 2, &[2.0, -0.5, -0.5, 1.5]);
    let c2 = DMatrix::from_row_slice(2, 2, &[4.0, 0.9, 0.9, 1.5]);
    let comps = vec![
        (
            0.5,
            Mvn::new(vec![1.0, 2.0], c1).expect("positive definite"),
        ),
        (
            0.5,
            Mvn::new(vec![-1.0, 1.0], c2).expect("positive definite"),
        ),
    ];
    TrueDensity {
        scenario: Scenario::NormalMix,
        dim: 2,
        kind: Kind::Normal(comps),
    }
}

/// Independent `Γ(2, 1)` coordinates on the positive quadrant.
pub fn make_scenario_ii() -> TrueDensity {
    TrueDensity {
        scenario: Scenario::GammaIndep,
        dim: 2,
        kind: Kind::Gamma,
    }
}

/// Means of the ring truth: angles `2π j / 500`, `j = 0..500`.
pub fn ring_means() -> Vec<Vec<f64>> {
    (0..500)
        .map(|j| {
            let t = 2.0 * PI * j as f64 / 500.0;
            vec![4.0 * t.cos(), 4.0 * t.sin()]
        })
        .collect()
}

/// 500-component spherical mixture on the radius-4 circle, scale 0.7.
pub fn make_scenario_iii() -> TrueDensity {
    let m = GaussianMixture::new(vec![1.0 / 500.0; 500], ring_means(), 0.7, 4.0)
        .or_else(|_| {
            // rounding can leave the weights 1 ulp off the simplex tolerance
            let mut w = vec![1.0 / 500.0; 500];
            let t: f64 = w.iter().sum();
            w.iter_mut().for_each(|v| *v /= t);
            GaussianMixture::new(w, ring_means(), 0.7, 4.0)
        })
        .expect("ring parameters are valid");
    TrueDensity {
        scenario: Scenario::Ring,
        dim: 2,
        kind: Kind::Spherical(m),
    }
}

/// Precision matrix of the 5-d graphical model.
pub fn ggm5_precision() -> DMatrix<f64> {
    DMatrix::from_row_slice(
        5,
        5,
        &[
            3.0, 0.0, 0.0, 0.0, 0.0, //
            0.0, 5.0, 0.0, 1.0, -1.0, //
            0.0, 0.0, 2.0, 0.0, 0.0, //
            0.0, 1.0, 0.0, 2.0, 0.0, //
            0.0, -1.0, 0.0, 0.0, 2.0,
        ],
    )
}

/// Factorization `f(Y2) f(Y1) f(Y3) f(Y4 | Y2) f(Y5 | Y2)` (0-based indices),
/// listed so that conditioning variables precede their dependents.
pub fn ggm5_factorization() -> GraphicalFactorization {
    GraphicalFactorization::new(
        vec![
            Factor {
                target: 1,
                conditioning: vec![],
            },
            Factor {
                target: 0,
                conditioning: vec![],
            },
            Factor {
                target: 2,
                conditioning: vec![],
            },
            Factor {
                target: 3,
                conditioning: vec![1],
            },
            Factor {
                target: 4,
                conditioning: vec![1],
            },
        ],
        5,
    )
    .expect("valid factorization")
}

/// Zero-mean normal with covariance equal to the inverse precision matrix.
pub fn make_ggm5() -> TrueDensity {
    let cov = ggm5_precision()
        .try_inverse()
        .expect("invertible precision");
    let cov = 0.5 * (&cov + cov.transpose());
    let mvn = Mvn::new(vec![0.0; 5], cov).expect("positive definite");
    TrueDensity {
        scenario: Scenario::Ggm5,
        dim: 5,
        kind: Kind::Normal(vec![(1.0, mvn)]),
    }
}

fn gamma21_pdf(y: f64) -> f64 {
    if y > 0.0 {
        y * (-y).exp()
    } else {
        0.0
    }
}

impl TrueDensity {
    pub fn scenario(&self) -> Scenario {
        self.scenario
    }

    pub fn label(&self) -> &'static str {
        self.scenario.label()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match &self.kind {
            Kind::Normal(c) => c.iter().map(|(w, m)| w * m.pdf(x)).sum(),
            Kind::Gamma => x.iter().map(|v| gamma21_pdf(*v)).product(),
            Kind::Spherical(m) => m.evaluate(x),
        }
    }

    pub fn sample(&self, count: usize, seed: u64) -> Result<Sample> {
        if count == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        Ok(self.sample_with(&mut seed::rng(seed), count))
    }

    pub fn sample_with<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Sample {
        match &self.kind {
            Kind::Normal(c) => {
                let mut data = Vec::with_capacity(count * self.dim);
                for _ in 0..count {
                    let u: f64 = rng.gen();
                    let mut acc = 0.0;
                    let mut pick = c.len() - 1;
                    for (k, (w, _)) in c.iter().enumerate() {
                        acc += w;
                        if u < acc {
                            pick = k;
                            break;
                        }
                    }
                    c[pick].1.draw(rng, &mut data);
                }
                Sample::from_flat(data, self.dim).expect("finite draws")
            }
            Kind::Gamma => {
                let g = Gamma::new(2.0, 1.0).expect("valid shape and scale");
                let data: Vec<f64> = (0..count * 2).map(|_| g.sample(rng)).collect();
                Sample::from_flat(data, 2).expect("finite draws")
            }
            Kind::Spherical(m) => m.sample_with(rng, count),
        }
    }

    /// Closed-form `∫ f₀²`.
    pub fn squared_l2_norm(&self) -> f64 {
        match &self.kind {
            Kind::Normal(c) => {
                let mut total = 0.0;
                for (wa, a) in c {
                    for (wb, b) in c {
                        total += wa * wb * a.overlap(b);
                    }
                }
                total
            }
            // ∫ (y e^{−y})² dy = 1/4 per coordinate
            Kind::Gamma => 1.0 / 16.0,
            Kind::Spherical(m) => m.squared_l2_norm(),
        }
    }

    /// Box `[lo, hi]` holding at least `1 − 1e-4` of the mass, padded so that
    /// estimates spilling past the support are also covered.
    pub fn ise_box(&self) -> (Vec<f64>, Vec<f64>) {
        match self.scenario {
            Scenario::NormalMix => (vec![-11.0, -6.0], vec![11.0, 9.0]),
            Scenario::GammaIndep => (vec![-5.0, -5.0], vec![17.0, 17.0]),
            Scenario::Ring => (vec![-9.0, -9.0], vec![9.0, 9.0]),
            Scenario::Ggm5 => (vec![-5.0; 5], vec![5.0; 5]),
        }
    }

    /// Implied factorization for graphical pilots (ggm5 only).
    pub fn factorization(&self) -> Option<GraphicalFactorization> {
        (self.scenario == Scenario::Ggm5).then(ggm5_factorization)
    }

    /// Covariance of the normal truths.
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        match &self.kind {
            Kind::Normal(c) => {
                let d = self.dim;
                let mut m = DVector::<f64>::zeros(d);
                let mut second = DMatrix::<f64>::zeros(d, d);
                for (w, n) in c {
                    m += *w * &n.mean;
                    second += *w * (&n.cov + &n.mean * n.mean.transpose());
                }
                Some(second - &m * m.transpose())
            }
            _ => None,
        }
    }
}

impl Density for TrueDensity {
    fn dim(&self) -> usize {
        self.dim
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl SquaredNorm for TrueDensity {
    fn squared_l2_norm(&self) -> f64 {
        TrueDensity::squared_l2_norm(self)
    }
}
