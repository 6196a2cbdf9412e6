//! Spherical Gaussian location mixtures with a shared scale.
//!
//! A mixture is `f(x) = Σ_s π_s φ(x; μ_s, q̄ I_d)` with `π` on the unit simplex
//! and every `μ_s` inside the box `[-M, M]^d`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::distributions::{Distribution, WeightedIndex};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::density::{std_normal_cdf, Density, SquaredNorm};
use crate::error::{invalid, Error, Result};
use crate::sample::Sample;
use crate::seed;

/// Values below this are treated as an underflow and reported as zero.
pub const UNDERFLOW: f64 = 1e-300;

/// Tolerance on `|Σ π_s − 1|`.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MixtureJson", into = "MixtureJson")]
pub struct GaussianMixture {
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
    qbar: f64,
    box_m: f64,
}

#[derive(Serialize, Deserialize)]
struct MixtureJson {
    #[serde(rename = "S")]
    s: usize,
    qbar: f64,
    #[serde(rename = "M")]
    m: f64,
    weights: Vec<f64>,
    means: Vec<Vec<f64>>,
}

impl TryFrom<MixtureJson> for GaussianMixture {
    type Error = Error;

    fn try_from(j: MixtureJson) -> Result<Self> {
        if j.s != j.weights.len() {
            return Err(invalid(format!(
                "S = {} but {} weights given",
                j.s,
                j.weights.len()
            )));
        }
        GaussianMixture::new(j.weights, j.means, j.qbar, j.m)
    }
}

impl From<GaussianMixture> for MixtureJson {
    fn from(m: GaussianMixture) -> Self {
        MixtureJson {
            s: m.weights.len(),
            qbar: m.qbar,
            m: m.box_m,
            weights: m.weights,
            means: m.means,
        }
    }
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, qbar: f64, box_m: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(invalid("a mixture needs at least one component"));
        }
        if weights.len() != means.len() {
            return Err(invalid(format!(
                "{} weights but {} means",
                weights.len(),
                means.len()
            )));
        }
        if !(qbar > 0.0 && qbar.is_finite()) {
            return Err(invalid(format!(
                "qbar must be positive and finite, got {qbar}"
            )));
        }
        if !(box_m > 0.0 && box_m.is_finite()) {
            return Err(invalid(format!(
                "box half-width must be positive and finite, got {box_m}"
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(invalid(format!("weights sum to {total}, not 1")));
        }
        let d = means[0].len();
        if d == 0 {
            return Err(invalid("means must have dimension at least 1"));
        }
        for (s, mu) in means.iter().enumerate() {
            if mu.len() != d {
                return Err(invalid(format!(
                    "mean {s} has dimension {}, expected {d}",
                    mu.len()
                )));
            }
            if mu.iter().any(|v| !v.is_finite() || v.abs() > box_m) {
                return Err(invalid(format!(
                    "mean {s} lies outside [-{box_m}, {box_m}]^{d}"
                )));
            }
        }
        Ok(GaussianMixture {
            weights,
            means,
            qbar,
            box_m,
        })
    }

    /// Single component `N(mu, qbar I)` with the default box around `mu`.
    pub fn single(mu: Vec<f64>, qbar: f64) -> Result<Self> {
        let m = mu.iter().fold(0.0_f64, |a, v| a.max(v.abs())) + 3.0 * qbar.sqrt();
        GaussianMixture::new(vec![1.0], vec![mu], qbar, m)
    }

    /// Default box half-width for a sample: max absolute coordinate plus `3√q̄`.
    pub fn default_box(sample: &Sample, qbar: f64) -> f64 {
        sample.max_abs() + 3.0 * qbar.sqrt()
    }

    pub fn components(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn means(&self) -> &[Vec<f64>] {
        &self.means
    }

    pub fn qbar(&self) -> f64 {
        self.qbar
    }

    pub fn box_m(&self) -> f64 {
        self.box_m
    }

    /// Normalizing constant `(2π q̄)^{-d/2}`.
    pub fn peak(&self) -> f64 {
        (2.0 * PI * self.qbar).powf(-0.5 * self.dim() as f64)
    }

    /// `φ(x; μ_s, q̄ I)`.
    pub fn component_density(&self, s: usize, x: &[f64]) -> f64 {
        let v = self.peak() * (-0.5 * sq_dist(x, &self.means[s]) / self.qbar).exp();
        if v < UNDERFLOW {
            0.0
        } else {
            v
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        let c = self.peak();
        let half_inv_q = 0.5 / self.qbar;
        let v: f64 = self
            .weights
            .iter()
            .zip(&self.means)
            .map(|(w, mu)| w * (-sq_dist(x, mu) * half_inv_q).exp())
            .sum::<f64>()
            * c;
        if v < UNDERFLOW {
            0.0
        } else {
            v
        }
    }

    /// Draw `count` observations: component `s ~ π`, then `x ~ N(μ_s, q̄ I)`.
    pub fn sample(&self, count: usize, seed: u64) -> Result<Sample> {
        if count == 0 {
            return Err(invalid("sample count must be at least 1"));
        }
        let mut rng = seed::rng(seed);
        Ok(self.sample_with(&mut rng, count))
    }

    pub(crate) fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Sample {
        let pick = WeightedIndex::new(&self.weights).expect("weights on the simplex");
        let sd = self.qbar.sqrt();
        let d = self.dim();
        let mut data = Vec::with_capacity(count * d);
        for _ in 0..count {
            let mu = &self.means[pick.sample(rng)];
            for m in mu {
                let z: f64 = rng.sample(StandardNormal);
                data.push(m + sd * z);
            }
        }
        Sample::from_flat(data, d).expect("finite draws")
    }

    /// Posterior component probabilities `π_s φ_s(x) / f(x)`, computed in
    /// log space so they stay accurate when `f(x)` is tiny.
    fn responsibilities(&self, x: &[f64]) -> Vec<f64> {
        let logs: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.means)
            .map(|(w, mu)| {
                if *w > 0.0 {
                    w.ln() - 0.5 * sq_dist(x, mu) / self.qbar
                } else {
                    f64::NEG_INFINITY
                }
            })
            .collect();
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut r: Vec<f64> = logs.iter().map(|l| (l - top).exp()).collect();
        let total: f64 = r.iter().sum();
        r.iter_mut().for_each(|v| *v /= total);
        r
    }

    fn check_positive(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return Err(invalid(
                "evaluation point must be finite with matching dimension",
            ));
        }
        if self.evaluate(x) == 0.0 {
            return Err(Error::NonFinite(format!(
                "mixture density underflows at {x:?}"
            )));
        }
        Ok(())
    }

    /// Hessian pieces at `x`: the rank-one score term `∇f ∇fᵀ / f²` and the
    /// constraint term `(1/f) Σ_s (π_s/q̄) φ_s (I − u_s u_sᵀ)` with
    /// `u_s = (x − μ_s)/√q̄`. Their sum is `−∇∇ᵀ log f(x)`.
    pub fn hessian_terms(&self, x: &[f64]) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        self.check_positive(x)?;
        let d = self.dim();
        let r = self.responsibilities(x);
        let mut score = DVector::<f64>::zeros(d);
        let mut constraint = DMatrix::<f64>::zeros(d, d);
        let inv_q = 1.0 / self.qbar;
        for (w, mu) in r.iter().zip(&self.means) {
            if *w == 0.0 {
                continue;
            }
            let z = DVector::from_iterator(d, x.iter().zip(mu).map(|(a, b)| (a - b) * inv_q));
            score.axpy(*w, &z, 1.0);
            constraint -= (*w) * &z * z.transpose();
            for j in 0..d {
                constraint[(j, j)] += w * inv_q;
            }
        }
        let outer = &score * score.transpose();
        Ok((outer, symmetrize(constraint)))
    }

    /// `−∇∇ᵀ log f(x)`; errors where `f(x)` underflows.
    pub fn neg_log_hessian(&self, x: &[f64]) -> Result<DMatrix<f64>> {
        let (outer, constraint) = self.hessian_terms(x)?;
        Ok(symmetrize(outer + constraint))
    }

    /// `∇ log f(x) = −Σ_s r_s(x) (x − μ_s)/q̄`.
    pub fn grad_log_density(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_positive(x)?;
        let r = self.responsibilities(x);
        let mut g = vec![0.0; self.dim()];
        for (w, mu) in r.iter().zip(&self.means) {
            for j in 0..g.len() {
                g[j] -= w * (x[j] - mu[j]) / self.qbar;
            }
        }
        Ok(g)
    }

    /// Distribution function `P(X ≤ t)` coordinatewise.
    pub fn cdf(&self, t: &[f64]) -> f64 {
        let sd = self.qbar.sqrt();
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, mu)| {
                w * t
                    .iter()
                    .zip(mu)
                    .map(|(a, m)| std_normal_cdf((a - m) / sd))
                    .product::<f64>()
            })
            .sum()
    }

    /// Mass of the axis-aligned box `[lo, hi]`; infinite bounds allowed.
    pub fn box_mass(&self, lo: &[f64], hi: &[f64]) -> f64 {
        let sd = self.qbar.sqrt();
        self.weights
            .iter()
            .zip(&self.means)
            .map(|(w, mu)| {
                w * (0..mu.len())
                    .map(|j| {
                        (std_normal_cdf((hi[j] - mu[j]) / sd)
                            - std_normal_cdf((lo[j] - mu[j]) / sd))
                        .max(0.0)
                    })
                    .product::<f64>()
            })
            .sum()
    }
}

impl Density for GaussianMixture {
    fn dim(&self) -> usize {
        GaussianMixture::dim(self)
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl SquaredNorm for GaussianMixture {
    /// `Σ_s Σ_t π_s π_t φ(μ_s − μ_t; 0, 2q̄ I)`.
    fn squared_l2_norm(&self) -> f64 {
        let d = self.dim() as f64;
        let c = (4.0 * PI * self.qbar).powf(-0.5 * d);
        let mut total = 0.0;
        for (ws, ms) in self.weights.iter().zip(&self.means) {
            for (wt, mt) in self.weights.iter().zip(&self.means) {
                total += ws * wt * (-0.25 * sq_dist(ms, mt) / self.qbar).exp();
            }
        }
        c * total
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    0.5 * (&m + m.transpose())
}

/// Smallest eigenvalue of a symmetric matrix with a unit eigenvector.
pub fn min_eigen(m: &DMatrix<f64>) -> (f64, DVector<f64>) {
    match m.nrows() {
        1 => (m[(0, 0)], DVector::from_element(1, 1.0)),
        2 => {
            let (a, b, c) = (m[(0, 0)], m[(0, 1)], m[(1, 1)]);
            let mid = 0.5 * (a + c);
            let rad = (0.25 * (a - c) * (a - c) + b * b).sqrt();
            let lam = mid - rad;
            let v = if b.abs() > 1e-300 {
                DVector::from_vec(vec![b, lam - a])
            } else if a <= c {
                DVector::from_vec(vec![1.0, 0.0])
            } else {
                DVector::from_vec(vec![0.0, 1.0])
            };
            let norm = v.norm();
            (lam, v / norm)
        }
        _ => {
            let eig = m.clone().symmetric_eigen();
            let (k, lam) =
                eig.eigenvalues
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |(bk, bl), (k, l)| if *l < bl { (k, *l) } else { (bk, bl) },
                    );
            (lam, eig.eigenvectors.column(k).into_owned())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_mixture(rng: &mut impl Rng, s: usize, d: usize) -> GaussianMixture {
        let mut w: Vec<f64> = (0..s).map(|_| rng.gen_range(0.05..1.0)).collect();
        let t: f64 = w.iter().sum();
        w.iter_mut().for_each(|v| *v /= t);
        let fix = 1.0 - w.iter().sum::<f64>();
        w[0] += fix;
        let means = (0..s)
            .map(|_| (0..d).map(|_| rng.gen_range(-2.0..2.0)).collect())
            .collect();
        GaussianMixture::new(w, means, rng.gen_range(0.3..1.5), 3.0).unwrap()
    }

    /// Central finite differences of `−log f`.
    fn fd_neg_log_hessian(m: &GaussianMixture, x: &[f64], h: f64) -> DMatrix<f64> {
        let d = x.len();
        let nl = |p: &[f64]| -m.evaluate(p).ln();
        let mut out = DMatrix::zeros(d, d);
        for i in 0..d {
            for j in 0..d {
                let mut pp = x.to_vec();
                let mut pm = x.to_vec();
                let mut mp = x.to_vec();
                let mut mm = x.to_vec();
                pp[i] += h;
                pp[j] += h;
                pm[i] += h;
                pm[j] -= h;
                mp[i] -= h;
                mp[j] += h;
                mm[i] -= h;
                mm[j] -= h;
                out[(i, j)] = (nl(&pp) - nl(&pm) - nl(&mp) + nl(&mm)) / (4.0 * h * h);
            }
        }
        out
    }

    #[test]
    fn gaussian_at_mean() {
        let m = GaussianMixture::single(vec![0.0, 0.0], 1.0).unwrap();
        assert_relative_eq!(
            m.evaluate(&[0.0, 0.0]),
            1.0 / (2.0 * PI),
            max_relative = 1e-15
        );
        assert_relative_eq!(
            m.evaluate(&[0.0, 0.0]),
            0.159_154_943_091_895_3,
            max_relative = 1e-12
        );
    }

    #[test]
    fn duplicate_components_collapse() {
        let one = GaussianMixture::single(vec![0.0], 1.0).unwrap();
        let two =
            GaussianMixture::new(vec![0.5, 0.5], vec![vec![0.0], vec![0.0]], 1.0, 3.0).unwrap();
        assert_relative_eq!(
            one.evaluate(&[0.0]),
            two.evaluate(&[0.0]),
            max_relative = 1e-15
        );
    }

    #[test]
    fn three_component_mixture_integrates_to_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let m = random_mixture(&mut rng, 3, 2);
        let pad = m.box_m() + 6.0 * m.qbar().sqrt();
        let grid = crate::grid::EvalGrid::cube(-pad, pad, 200, 2).unwrap();
        assert!((m.integrate_on(&grid) - 1.0).abs() < 1e-3);
    }

    #[test]
    fn constructor_validates() {
        assert!(
            GaussianMixture::new(vec![0.5, 0.6], vec![vec![0.0], vec![0.0]], 1.0, 1.0).is_err()
        );
        assert!(GaussianMixture::new(vec![1.0], vec![vec![2.0]], 1.0, 1.0).is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![vec![0.0]], 0.0, 1.0).is_err());
        assert!(GaussianMixture::new(vec![1.0], vec![vec![0.0]], 1.0, -1.0).is_err());
        assert!(
            GaussianMixture::new(vec![-0.5, 1.5], vec![vec![0.0], vec![0.0]], 1.0, 1.0).is_err()
        );
    }

    #[test]
    fn sample_rejects_zero_count() {
        let m = GaussianMixture::single(vec![0.0], 1.0).unwrap();
        assert!(m.sample(0, 1).is_err());
    }

    #[test]
    fn sample_mean_of_single_gaussian() {
        let m = GaussianMixture::single(vec![0.0, 0.0], 1.0).unwrap();
        let s = m.sample(100_000, 5).unwrap();
        for v in s.mean() {
            assert!(v.abs() < 0.02, "mean {v}");
        }
    }

    #[test]
    fn degenerate_weights_only_draw_active_component() {
        let m =
            GaussianMixture::new(vec![1.0, 0.0], vec![vec![-5.0], vec![5.0]], 0.25, 6.0).unwrap();
        let s = m.sample(5000, 9).unwrap();
        assert!(s.rows().all(|r| r[0] < 0.0));
    }

    #[test]
    fn sample_matches_analytic_cdf() {
        let m =
            GaussianMixture::new(vec![0.3, 0.7], vec![vec![-1.5], vec![1.0]], 0.5, 3.0).unwrap();
        let mut xs = m.sample(100_000, 21).unwrap().column(0);
        xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = xs.len() as f64;
        let ks = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let f = m.cdf(&[*x]);
                (f - i as f64 / n).abs().max((f - (i + 1) as f64 / n).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.01, "KS distance {ks}");
    }

    #[test]
    fn identical_seeds_give_identical_samples() {
        let m = GaussianMixture::new(
            vec![0.3, 0.7],
            vec![vec![-1.5, 0.0], vec![1.0, 1.0]],
            0.5,
            3.0,
        )
        .unwrap();
        assert_eq!(m.sample(1000, 4).unwrap(), m.sample(1000, 4).unwrap());
        assert_ne!(m.sample(1000, 4).unwrap(), m.sample(1000, 5).unwrap());
    }

    #[test]
    fn single_gaussian_hessian_is_scaled_identity() {
        let m = GaussianMixture::single(vec![0.5, -0.5], 1.0).unwrap();
        for x in [[0.0, 0.0], [2.0, -1.0], [-3.0, 2.5]] {
            let h = m.neg_log_hessian(&x).unwrap();
            assert!((h - DMatrix::<f64>::identity(2, 2)).abs().max() < 1e-12);
        }
        let q = GaussianMixture::single(vec![0.0], 0.25).unwrap();
        assert_relative_eq!(
            q.neg_log_hessian(&[1.0]).unwrap()[(0, 0)],
            4.0,
            max_relative = 1e-12
        );
    }

    #[test]
    fn separated_components_give_negative_curvature_at_midpoint() {
        let m = GaussianMixture::new(
            vec![0.5, 0.5],
            vec![vec![-3.0, 0.0], vec![3.0, 0.0]],
            1.0,
            4.0,
        )
        .unwrap();
        let h = m.neg_log_hessian(&[0.0, 0.0]).unwrap();
        let fd = fd_neg_log_hessian(&m, &[0.0, 0.0], 1e-4);
        assert!(min_eigen(&h).0 < 0.0);
        assert!(min_eigen(&fd).0 < 0.0);
        assert!((h - fd).abs().max() < 1e-4);
    }

    #[test]
    fn hessian_refuses_underflow() {
        let m = GaussianMixture::single(vec![0.0], 0.01).unwrap();
        assert!(matches!(
            m.neg_log_hessian(&[100.0]),
            Err(Error::NonFinite(_))
        ));
        assert_eq!(m.evaluate(&[100.0]), 0.0);
    }

    #[test]
    fn hessian_terms_sum_and_weyl_bound() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let m = random_mixture(&mut rng, 4, 2);
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (outer, c) = m.hessian_terms(&x).unwrap();
            let h = m.neg_log_hessian(&x).unwrap();
            assert!((&outer + &c - &h).abs().max() < 1e-12);
            // the score term is PSD, so it can only raise the smallest eigenvalue
            assert!(min_eigen(&c).0 <= min_eigen(&h).0 + 1e-12);
        }
    }

    #[test]
    fn squared_norm_matches_quadrature() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let m = random_mixture(&mut rng, 3, 2);
        let pad = m.box_m() + 7.0 * m.qbar().sqrt();
        let grid = crate::grid::EvalGrid::cube(-pad, pad, 300, 2).unwrap();
        let quad: f64 =
            grid.points().map(|p| m.evaluate(p).powi(2)).sum::<f64>() * grid.cell_volume();
        assert!((quad - m.squared_l2_norm()).abs() < 1e-6);
    }

    #[test]
    fn json_round_trip_is_bit_exact() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let m = random_mixture(&mut rng, 5, 3);
        let text = serde_json::to_string(&m).unwrap();
        assert!(text.contains("\"S\":5"));
        let back: GaussianMixture = serde_json::from_str(&text).unwrap();
        assert_eq!(back, m);
        for (a, b) in back.weights().iter().zip(m.weights()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn json_rejects_inconsistent_count() {
        let bad = r#"{"S":2,"qbar":1.0,"M":3.0,"weights":[1.0],"means":[[0.0]]}"#;
        assert!(serde_json::from_str::<GaussianMixture>(bad).is_err());
    }

    #[test]
    fn min_eigen_matches_nalgebra() {
        let m = DMatrix::from_row_slice(2, 2, &[2.0, 0.7, 0.7, -1.0]);
        let reference = m.clone().symmetric_eigen().eigenvalues.min();
        let (lam, v) = min_eigen(&m);
        assert_relative_eq!(lam, reference, max_relative = 1e-12);
        assert!((&m * &v - lam * &v).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn hessian_matches_finite_differences(seed in 0u64..1_000_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let s = rng.gen_range(1..5);
            let d = rng.gen_range(1..4);
            let m = random_mixture(&mut rng, s, d);
            let x: Vec<f64> = (0..d).map(|_| rng.gen_range(-2.5..2.5)).collect();
            let h = m.neg_log_hessian(&x).unwrap();
            let fd = fd_neg_log_hessian(&m, &x, 1e-4);
            let scale = h.abs().max().max(1.0);
            prop_assert!((&h - &fd).abs().max() / scale < 1e-4);
            prop_assert!((&h - h.transpose()).abs().max() < 1e-12);
        }

        #[test]
        fn evaluation_is_linear_in_components(seed in 0u64..1_000_000) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = random_mixture(&mut rng, 4, 2);
            let x: Vec<f64> = (0..2).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let by_parts: f64 = (0..4).map(|s| m.weights()[s] * m.component_density(s, &x)).sum();
            prop_assert!((m.evaluate(&x) - by_parts).abs() < 1e-14);
        }
    }
}
