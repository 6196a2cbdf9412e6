//! Density-based Bayes classification and the breast-cancer experiment.
//!
//! Each class gets its own density estimate; a point is assigned to the class
//! with the larger prior-weighted density, ties going to the malignant class.

use std::path::Path;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::Density;
use crate::error::{invalid, io_err, Error, Result};
use crate::metrics::{median, summarize};
use crate::mixture::sq_dist;
use crate::pilots::{iqr_binwidths, BandwidthRule, HistogramEstimate, Kde, PilotDensity};
use crate::projection::{project, MeanInit, ProjectionConfig};
use crate::sample::Sample;
use crate::seed;

/// Zero-based positions, within the 30 feature columns, of mean radius, mean
/// texture, mean concave points and mean fractal dimension.
pub const WDBC_FEATURES: [usize; 4] = [0, 1, 7, 9];
pub const WDBC_ROWS: usize = 569;
pub const WDBC_MALIGNANT: usize = 212;
pub const WDBC_BENIGN: usize = 357;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    pub features: Sample,
    /// `true` for malignant.
    pub labels: Vec<bool>,
    pub provenance: String,
}

impl LabeledDataset {
    pub fn new(features: Sample, labels: Vec<bool>, provenance: impl Into<String>) -> Result<Self> {
        if features.n() != labels.len() {
            return Err(invalid("feature rows and labels differ in number"));
        }
        let pos = labels.iter().filter(|l| **l).count();
        if pos == 0 || pos == labels.len() {
            return Err(invalid("both classes need at least one observation"));
        }
        Ok(LabeledDataset {
            features,
            labels,
            provenance: provenance.into(),
        })
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn positives(&self) -> usize {
        self.labels.iter().filter(|l| **l).count()
    }
}

/// Reads a UCI `wdbc.data` file: id, diagnosis (`M`/`B`), 30 features.
pub fn load_wdbc(path: &Path) -> Result<LabeledDataset> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        message,
    };
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != 32 {
            return Err(parse_err(
                line,
                format!("expected 32 fields, found {}", fields.len()),
            ));
        }
        labels.push(match fields[1] {
            "M" => true,
            "B" => false,
            other => {
                return Err(parse_err(
                    line,
                    format!("diagnosis must be M or B, found {other:?}"),
                ))
            }
        });
        for j in WDBC_FEATURES {
            let v: f64 = fields[2 + j].parse().map_err(|_| {
                parse_err(
                    line,
                    format!("feature {} is not a number: {:?}", j + 1, fields[2 + j]),
                )
            })?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("feature {} is not finite", j + 1)));
            }
            data.push(v);
        }
    }
    let malignant = labels.iter().filter(|l| **l).count();
    if labels.len() != WDBC_ROWS || malignant != WDBC_MALIGNANT {
        return Err(Error::DatasetMismatch(format!(
            "expected {WDBC_ROWS} rows with {WDBC_MALIGNANT} malignant and {WDBC_BENIGN} benign, found {} rows with {} malignant and {} benign",
            labels.len(),
            malignant,
            labels.len() - malignant
        )));
    }
    LabeledDataset::new(
        Sample::from_flat(data, WDBC_FEATURES.len())?,
        labels,
        format!("UCI wdbc.data at {}", path.display()),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub malignant: f64,
    pub benign: f64,
    /// Both prior-weighted densities were zero.
    pub tie: bool,
}

/// `p₁f₁(y) / (p₁f₁(y) + (1 − p₁)f₀(y))` and its complement.
pub fn bayes_posterior(f1: &dyn Density, f0: &dyn Density, p1: f64, y: &[f64]) -> Posterior {
    posterior_from_values(f1.density(y), f0.density(y), p1)
}

pub fn posterior_from_values(f1y: f64, f0y: f64, p1: f64) -> Posterior {
    let a = f1y * p1;
    let b = f0y * (1.0 - p1);
    if a + b > 0.0 {
        let post1 = (a / (a + b)).clamp(0.0, 1.0);
        Posterior {
            malignant: post1,
            benign: 1.0 - post1,
            tie: false,
        }
    } else {
        Posterior {
            malignant: 0.5,
            benign: 0.5,
            tie: true,
        }
    }
}

/// Malignant iff its posterior is at least the benign one.
pub fn classify(post: &Posterior) -> bool {
    post.malignant >= post.benign
}

/// Per-class density estimator used in the experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ClassEstimator {
    /// Histogram pilot with widths `c · IQR_j · n^{-1/(2d)}`, projected onto
    /// `components` spherical components initialized on a grid over the
    /// class data. Without an explicit `qbar`, both classes share
    /// `qbar_scale · median pairwise squared distance / d` computed over all
    /// training rows.
    Spe {
        components: usize,
        width_c: f64,
        qbar: Option<f64>,
        qbar_scale: f64,
    },
    /// Gaussian KDE with the least-squares cross-validated bandwidth.
    KdeLscv,
    /// The same constant density for both classes, so the priors decide.
    Constant,
}

impl ClassEstimator {
    pub fn spe_default() -> Self {
        ClassEstimator::Spe {
            components: 81,
            width_c: 2.0,
            qbar: None,
            qbar_scale: 0.5,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            ClassEstimator::Spe { .. } => "spe",
            ClassEstimator::KdeLscv => "kde-cv",
            ClassEstimator::Constant => "constant",
        }
    }

    pub fn from_label(label: &str) -> Result<Self> {
        match label {
            "spe" => Ok(ClassEstimator::spe_default()),
            "kde-cv" => Ok(ClassEstimator::KdeLscv),
            "constant" => Ok(ClassEstimator::Constant),
            other => Err(invalid(format!(
                "unknown estimator {other:?}; expected spe, kde-cv or constant"
            ))),
        }
    }

    /// Mixture scale for a training set (SPE only).
    pub fn resolve_qbar(&self, train: &Sample) -> Option<f64> {
        match self {
            ClassEstimator::Spe { qbar: Some(q), .. } => Some(*q),
            ClassEstimator::Spe {
                qbar: None,
                qbar_scale,
                ..
            } => Some(qbar_scale * median_sq_distance(train) / train.dim() as f64),
            _ => None,
        }
    }

    /// Fits one class. `qbar` is the resolved scale and is required for SPE.
    pub fn fit(
        &self,
        sample: &Sample,
        qbar: Option<f64>,
    ) -> Result<Box<dyn Density + Send + Sync>> {
        match self {
            ClassEstimator::Spe {
                components,
                width_c,
                ..
            } => {
                let q = qbar.ok_or_else(|| invalid("SPE needs a resolved mixture scale"))?;
                let widths = iqr_binwidths(sample, &BandwidthRule::Iqr2d { c: *width_c })?;
                let pilot: PilotDensity =
                    HistogramEstimate::fit(sample, &widths, &vec![0.0; sample.dim()])?.into();
                let cfg = ProjectionConfig {
                    init: MeanInit::DataHull,
                    ..ProjectionConfig::new(*components, q)
                };
                let (m, _) = project(&pilot, sample, &cfg)?;
                Ok(Box::new(m))
            }
            ClassEstimator::KdeLscv => {
                let h = BandwidthRule::Lscv { grid: None }.kde_bandwidth(sample)?;
                Ok(Box::new(Kde::new(sample, h)?))
            }
            ClassEstimator::Constant => Ok(Box::new(ConstantDensity { d: sample.dim() })),
        }
    }
}

struct ConstantDensity {
    d: usize,
}

impl Density for ConstantDensity {
    fn dim(&self) -> usize {
        self.d
    }

    fn density(&self, _x: &[f64]) -> f64 {
        1.0
    }
}

/// Median of the squared distances over all pairs of rows.
pub fn median_sq_distance(sample: &Sample) -> f64 {
    let n = sample.n();
    let mut d2 = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            d2.push(sq_dist(sample.row(i), sample.row(j)));
        }
    }
    median(&d2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub estimator: ClassEstimator,
    pub reps: usize,
    pub test_size: usize,
    pub seed: u64,
    /// Center and scale each feature with the training rows of the
    /// replication before fitting.
    pub standardize: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            estimator: ClassEstimator::spe_default(),
            reps: 100,
            test_size: 50,
            seed: 0,
            standardize: true,
        }
    }
}

/// One replication: misclassification rate on the held-out rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepOutcome {
    pub rep: usize,
    pub seed: u64,
    pub rate: Option<f64>,
    pub ties: usize,
    /// Mixture scale shared by both class fits (SPE only).
    pub qbar: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierReport {
    pub method: String,
    pub estimator: ClassEstimator,
    pub test_size: usize,
    pub standardize: bool,
    /// Rates of the successful replications, in replication order.
    pub rates: Vec<f64>,
    pub mean: f64,
    pub sd: f64,
    pub failed_reps: usize,
    pub outcomes: Vec<RepOutcome>,
}

impl ClassifierReport {
    pub fn rates_csv(&self) -> String {
        let mut out = String::from("rep,seed,rate\n");
        for o in &self.outcomes {
            let rate = o.rate.map(crate::sample::fmt_f64).unwrap_or_default();
            out.push_str(&format!("{},{},{}\n", o.rep, o.seed, rate));
        }
        out
    }
}

/// Training and test row indices of one replication; a true partition.
pub fn split_rows(n: usize, test_size: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut test = index::sample(&mut seed::rng(seed), n, test_size).into_vec();
    test.sort_unstable();
    let mut is_test = vec![false; n];
    for i in &test {
        is_test[*i] = true;
    }
    let train = (0..n).filter(|i| !is_test[*i]).collect();
    (train, test)
}

fn standardizer(sample: &Sample) -> (Vec<f64>, Vec<f64>) {
    let mean = sample.mean();
    let n = sample.n() as f64;
    let sd = (0..sample.dim())
        .map(|j| {
            let v = sample.rows().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / (n - 1.0);
            if v > 0.0 {
                v.sqrt()
            } else {
                1.0
            }
        })
        .collect();
    (mean, sd)
}

fn transform(rows: &[usize], ds: &LabeledDataset, shift: &[f64], scale: &[f64]) -> Result<Sample> {
    let d = ds.features.dim();
    let mut flat = Vec::with_capacity(rows.len() * d);
    for i in rows {
        flat.extend(
            ds.features
                .row(*i)
                .iter()
                .enumerate()
                .map(|(j, v)| (v - shift[j]) / scale[j]),
        );
    }
    Sample::from_flat(flat, d)
}

fn run_rep(ds: &LabeledDataset, cfg: &ExperimentConfig, rep: usize) -> RepOutcome {
    let rep_seed = seed::child_seed(cfg.seed, rep as u64);
    let mut out = RepOutcome {
        rep,
        seed: rep_seed,
        rate: None,
        ties: 0,
        qbar: None,
        error: None,
    };
    match fit_and_score(ds, cfg, rep_seed) {
        Ok((rate, ties, qbar)) => {
            out.rate = Some(rate);
            out.ties = ties;
            out.qbar = qbar;
        }
        Err(e) => {
            log::warn!("replication {rep} failed: {e}");
            out.error = Some(e.to_string());
        }
    }
    out
}

fn fit_and_score(
    ds: &LabeledDataset,
    cfg: &ExperimentConfig,
    rep_seed: u64,
) -> Result<(f64, usize, Option<f64>)> {
    let (train, test) = split_rows(ds.n(), cfg.test_size, rep_seed);
    let d = ds.features.dim();
    let (shift, scale) = if cfg.standardize {
        standardizer(&ds.features.select(&train)?)
    } else {
        (vec![0.0; d], vec![1.0; d])
    };
    let pos: Vec<usize> = train.iter().copied().filter(|i| ds.labels[*i]).collect();
    let neg: Vec<usize> = train.iter().copied().filter(|i| !ds.labels[*i]).collect();
    if pos.is_empty() || neg.is_empty() {
        return Err(invalid("a class is absent from the training rows"));
    }
    let p1 = pos.len() as f64 / train.len() as f64;
    let qbar = cfg
        .estimator
        .resolve_qbar(&transform(&train, ds, &shift, &scale)?);
    let f1 = cfg
        .estimator
        .fit(&transform(&pos, ds, &shift, &scale)?, qbar)?;
    let f0 = cfg
        .estimator
        .fit(&transform(&neg, ds, &shift, &scale)?, qbar)?;
    let test_x = transform(&test, ds, &shift, &scale)?;
    let mut wrong = 0usize;
    let mut ties = 0usize;
    for (k, y) in test_x.rows().enumerate() {
        let post = bayes_posterior(f1.as_ref(), f0.as_ref(), p1, y);
        ties += post.tie as usize;
        if classify(&post) != ds.labels[test[k]] {
            wrong += 1;
        }
    }
    Ok((wrong as f64 / test.len() as f64, ties, qbar))
}

/// Repeated random 50-row hold-out evaluation of one estimator.
pub fn run_wdbc_experiment(
    ds: &LabeledDataset,
    cfg: &ExperimentConfig,
) -> Result<ClassifierReport> {
    if cfg.reps == 0 {
        return Err(invalid("reps must be at least 1"));
    }
    if cfg.test_size == 0 || cfg.test_size >= ds.n() {
        return Err(invalid(format!(
            "test size must lie in 1..{}, got {}",
            ds.n(),
            cfg.test_size
        )));
    }
    let outcomes: Vec<RepOutcome> = (0..cfg.reps)
        .into_par_iter()
        .map(|r| run_rep(ds, cfg, r))
        .collect();
    let rates: Vec<f64> = outcomes.iter().filter_map(|o| o.rate).collect();
    let s = summarize(&rates);
    Ok(ClassifierReport {
        method: cfg.estimator.label().to_string(),
        estimator: cfg.estimator.clone(),
        test_size: cfg.test_size,
        standardize: cfg.standardize,
        failed_reps: outcomes.len() - rates.len(),
        mean: s.mean,
        sd: s.sd,
        rates,
        outcomes,
    })
}
