//! Replication records and their summaries.

use serde::{Deserialize, Serialize};

use crate::sample::fmt_f64;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    /// Sample variance (`n − 1` denominator); zero for a single value.
    pub variance: f64,
    pub sd: f64,
}

/// Mean, median and sample variance; NaN fields for an empty slice.
pub fn summarize(values: &[f64]) -> Summary {
    let n = values.len();
    if n == 0 {
        return Summary {
            count: 0,
            mean: f64::NAN,
            median: f64::NAN,
            variance: f64::NAN,
            sd: f64::NAN,
        };
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let variance = if n > 1 {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64
    } else {
        0.0
    };
    Summary {
        count: n,
        mean,
        median: median(values),
        variance,
        sd: variance.sqrt(),
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// One replication of one method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IseRecord {
    pub scenario: String,
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub ise: f64,
    pub wall_ms: f64,
}

impl IseRecord {
    pub fn sqrt_ise(&self) -> f64 {
        self.ise.max(0.0).sqrt()
    }
}

pub const ISE_CSV_HEADER: &str = "scenario,method,n,seed,ise,sqrt_ise,wall_ms";

/// CSV rows with header `scenario,method,n,seed,ise,sqrt_ise,wall_ms`.
pub fn ise_records_csv(records: &[IseRecord]) -> String {
    let mut out = String::from(ISE_CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.scenario,
            r.method,
            r.n,
            r.seed,
            fmt_f64(r.ise),
            fmt_f64(r.sqrt_ise()),
            fmt_f64(r.wall_ms)
        ));
    }
    out
}

/// Aggregate over the replications of one (scenario, method, n) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IseReport {
    pub scenario: String,
    pub method: String,
    pub n: usize,
    pub ise: Vec<f64>,
    pub summary: Summary,
}

impl IseReport {
    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a IseRecord>) -> Vec<IseReport> {
        let mut out: Vec<IseReport> = Vec::new();
        for r in records {
            match out
                .iter_mut()
                .find(|c| c.scenario == r.scenario && c.method == r.method && c.n == r.n)
            {
                Some(c) => c.ise.push(r.ise),
                None => out.push(IseReport {
                    scenario: r.scenario.clone(),
                    method: r.method.clone(),
                    n: r.n,
                    ise: vec![r.ise],
                    summary: Summary::default(),
                }),
            }
        }
        for c in &mut out {
            c.summary = summarize(&c.ise);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_values() {
        let s = summarize(&[1.0, 2.0, 3.0, 10.0]);
        assert_eq!(s.mean, 4.0);
        assert_eq!(s.median, 2.5);
        assert!((s.variance - 50.0 / 3.0).abs() < 1e-12);
        assert_eq!(summarize(&[5.0]).variance, 0.0);
    }

    #[test]
    fn csv_and_grouping() {
        let recs = vec![
            IseRecord {
                scenario: "ring".into(),
                method: "spe".into(),
                n: 100,
                seed: 1,
                ise: 0.04,
                wall_ms: 3.0,
            },
            IseRecord {
                scenario: "ring".into(),
                method: "spe".into(),
                n: 100,
                seed: 2,
                ise: 0.09,
                wall_ms: 3.0,
            },
            IseRecord {
                scenario: "ring".into(),
                method: "hist".into(),
                n: 100,
                seed: 1,
                ise: 0.01,
                wall_ms: 1.0,
            },
        ];
        let csv = ise_records_csv(&recs);
        assert!(csv.starts_with("scenario,method,n,seed,ise,sqrt_ise,wall_ms\nring,spe,100,1,4.0000000000000001e-2,2.0000000000000001e-1,"));
        let reports = IseReport::from_records(&recs);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].ise, vec![0.04, 0.09]);
    }
}
