//! Sup distance between a pilot distribution function and the empirical one.

use crate::error::{invalid, Error, Result};
use crate::pilots::PilotDensity;
use crate::sample::Sample;

/// Probe set: the data points, the corners of every populated bin (histogram
/// pilots) and the all-`+∞` corner.
pub fn default_probes(pilot: &PilotDensity, sample: &Sample) -> Vec<Vec<f64>> {
    let mut probes: Vec<Vec<f64>> = sample.rows().map(<[f64]>::to_vec).collect();
    match pilot {
        PilotDensity::Histogram(h) => probes.extend(h.bin_corners()),
        PilotDensity::Perturbed(p) => {
            for m in p.members() {
                probes.extend(m.bin_corners());
            }
        }
        _ => {}
    }
    probes.push(vec![f64::INFINITY; sample.dim()]);
    probes
}

/// `max_t |F̂(t) − F_n(t)|` over the probes. At each probe the empirical
/// function is taken both closed (`Y ≤ t`) and as the left limit (`Y < t`),
/// so the supremum is exact in one dimension.
pub fn sup_cdf_distance(
    pilot: &PilotDensity,
    sample: &Sample,
    probes: Option<&[Vec<f64>]>,
) -> Result<f64> {
    if matches!(
        pilot,
        PilotDensity::Tabulated(_) | PilotDensity::Graphical(_)
    ) {
        return Err(Error::Unsupported(format!(
            "no closed-form CDF for a {} pilot",
            pilot.kind().label()
        )));
    }
    let owned;
    let probes = match probes {
        Some(p) => p,
        None => {
            owned = default_probes(pilot, sample);
            &owned
        }
    };
    if probes.iter().any(|t| t.len() != sample.dim()) {
        return Err(invalid("probe dimension differs from the sample"));
    }
    let n = sample.n() as f64;
    let mut sup = 0.0_f64;
    for t in probes {
        let f_hat = pilot.cdf(t)?;
        let mut le = 0usize;
        let mut lt = 0usize;
        for y in sample.rows() {
            if y.iter().zip(t).all(|(a, b)| a <= b) {
                le += 1;
                if y.iter().zip(t).all(|(a, b)| a < b) {
                    lt += 1;
                }
            }
        }
        sup = sup
            .max((f_hat - le as f64 / n).abs())
            .max((f_hat - lt as f64 / n).abs());
    }
    Ok(sup)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::GaussianMixture;
    use crate::pilots::{HistogramEstimate, Kde};

    #[test]
    fn single_point_histogram_at_infinity() {
        let s = Sample::from_rows(&[[0.5]]).unwrap();
        let h: PilotDensity = HistogramEstimate::fit(&s, &[1.0], &[0.0]).unwrap().into();
        let d = sup_cdf_distance(&h, &s, Some(&[vec![f64::INFINITY]])).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn two_point_sample_by_hand() {
        // data 0.2 and 0.7, one bin [0, 1): F̂(t) = t on [0, 1]; F_n jumps by
        // 1/2 at each datum, so the gaps are 0.2, 0.3 (at 0.2⁺), 0.2 (at 0.7⁻)
        // and 0.3 (at 0.7⁺)
        let s = Sample::from_rows(&[[0.2], [0.7]]).unwrap();
        let h: PilotDensity = HistogramEstimate::fit(&s, &[1.0], &[0.0]).unwrap().into();
        let d = sup_cdf_distance(&h, &s, None).unwrap();
        assert!((d - 0.3).abs() < 1e-15);
    }

    #[test]
    fn kde_distance_shrinks_with_bandwidth() {
        let s = GaussianMixture::single(vec![0.0], 1.0)
            .unwrap()
            .sample(300, 6)
            .unwrap();
        let ds: Vec<f64> = [1.0, 0.5, 0.1, 0.02]
            .iter()
            .map(|h| sup_cdf_distance(&Kde::new(&s, *h).unwrap().into(), &s, None).unwrap())
            .collect();
        assert!(ds.windows(2).all(|w| w[1] < w[0]), "{ds:?}");
    }

    #[test]
    fn nonnegative_and_rejects_tabulated() {
        let s = Sample::from_rows(&[[0.0], [1.0]]).unwrap();
        let t = crate::pilots::TabulatedDensity::new(vec![vec![0.0, 1.0]], vec![1.0, 1.0]).unwrap();
        assert!(sup_cdf_distance(&t.into(), &s, None).is_err());
        let k: PilotDensity = Kde::new(&s, 0.3).unwrap().into();
        assert!(sup_cdf_distance(&k, &s, None).unwrap() >= 0.0);
    }
}
