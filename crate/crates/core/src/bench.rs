//! Simulation harness shared by the command line and the acceptance checks.
//!
//! A replication draws one sample per (scenario, n, rep) and fits every
//! method to it, so methods are compared on common data. Sample, fit and
//! Monte-Carlo seeds are all derived from the run seed with
//! [`seed::child_seed`], so results do not depend on scheduling.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{em_spherical, EmConfig};
use crate::datagen::{Scenario, TrueDensity};
use crate::density::Density;
use crate::error::{invalid, Result};
use crate::grid::EvalGrid;
use crate::metrics::{
    default_ise_grid, half_mass_region, ise_grid, ise_mc, ise_mc_pilot, mass_in_region, median,
    IseRecord, Region, TruthTable,
};
use crate::mixture::GaussianMixture;
use crate::pilots::{
    iqr_binwidths, BandwidthRule, GraphicalFactorization, GraphicalHistogram, HistogramEstimate,
    Kde, PerturbedHistogram, PilotDensity,
};
use crate::projection::{direct_project, project, ProjectionConfig, ProjectionTrace};
use crate::sample::{fmt_f64, Sample};
use crate::seed;

/// How a pilot is built from a sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PilotSpec {
    Histogram {
        width: BandwidthRule,
    },
    Perturbed {
        width: BandwidthRule,
        fraction: f64,
        count: usize,
    },
    /// Uses the scenario's factorization, or independence when it has none.
    Graphical {
        width: BandwidthRule,
    },
    Kde {
        bandwidth: BandwidthRule,
    },
}

impl PilotSpec {
    pub fn fit(
        &self,
        sample: &Sample,
        factorization: Option<&GraphicalFactorization>,
        seed: u64,
    ) -> Result<PilotDensity> {
        let origin = vec![0.0; sample.dim()];
        Ok(match self {
            PilotSpec::Histogram { width } => {
                HistogramEstimate::fit(sample, &iqr_binwidths(sample, width)?, &origin)?.into()
            }
            PilotSpec::Perturbed {
                width,
                fraction,
                count,
            } => PerturbedHistogram::fit(
                sample,
                &iqr_binwidths(sample, width)?,
                *fraction,
                *count,
                seed,
            )?
            .into(),
            PilotSpec::Graphical { width } => {
                let f = match factorization {
                    Some(f) => f.clone(),
                    None => GraphicalFactorization::independent(sample.dim()),
                };
                GraphicalHistogram::fit(sample, &f, &iqr_binwidths(sample, width)?)?.into()
            }
            PilotSpec::Kde { bandwidth } => {
                Kde::new(sample, bandwidth.kde_bandwidth(sample)?)?.into()
            }
        })
    }

    /// Copy with the width-rule constant replaced (IQR rules only).
    pub fn with_width_c(&self, c: f64) -> PilotSpec {
        let set = |rule: &BandwidthRule| match rule {
            BandwidthRule::IqrQuarter { .. } => BandwidthRule::IqrQuarter { c },
            BandwidthRule::Iqr2d { .. } => BandwidthRule::Iqr2d { c },
            other => other.clone(),
        };
        match self {
            PilotSpec::Histogram { width } => PilotSpec::Histogram { width: set(width) },
            PilotSpec::Perturbed {
                width,
                fraction,
                count,
            } => PilotSpec::Perturbed {
                width: set(width),
                fraction: *fraction,
                count: *count,
            },
            PilotSpec::Graphical { width } => PilotSpec::Graphical { width: set(width) },
            PilotSpec::Kde { .. } => self.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum EstimatorSpec {
    Pilot {
        pilot: PilotSpec,
    },
    Spe {
        pilot: PilotSpec,
        projection: ProjectionConfig,
    },
    Direct {
        projection: ProjectionConfig,
    },
    Em {
        components: usize,
        qbar: f64,
    },
}

impl EstimatorSpec {
    pub fn fit(
        &self,
        sample: &Sample,
        factorization: Option<&GraphicalFactorization>,
        seed: u64,
    ) -> Result<Fitted> {
        match self {
            EstimatorSpec::Pilot { pilot } => {
                Ok(Fitted::Pilot(pilot.fit(sample, factorization, seed)?))
            }
            EstimatorSpec::Spe { pilot, projection } => {
                let p = pilot.fit(sample, factorization, seed)?;
                let (m, trace) = project(&p, sample, projection)?;
                Ok(Fitted::Mixture(m, Some(trace)))
            }
            EstimatorSpec::Direct { projection } => {
                let (m, trace) = direct_project(sample, projection)?;
                Ok(Fitted::Mixture(m, Some(trace)))
            }
            EstimatorSpec::Em { components, qbar } => {
                let fit = em_spherical(sample, &EmConfig::new(*components, *qbar, seed))?;
                Ok(Fitted::Mixture(fit.mixture, None))
            }
        }
    }

    pub fn with_width_c(&self, c: f64) -> EstimatorSpec {
        match self {
            EstimatorSpec::Pilot { pilot } => EstimatorSpec::Pilot {
                pilot: pilot.with_width_c(c),
            },
            EstimatorSpec::Spe { pilot, projection } => EstimatorSpec::Spe {
                pilot: pilot.with_width_c(c),
                projection: projection.clone(),
            },
            other => other.clone(),
        }
    }

    pub fn with_qbar(&self, qbar: f64) -> EstimatorSpec {
        match self {
            EstimatorSpec::Spe { pilot, projection } => EstimatorSpec::Spe {
                pilot: pilot.clone(),
                projection: ProjectionConfig {
                    qbar,
                    ..projection.clone()
                },
            },
            EstimatorSpec::Direct { projection } => EstimatorSpec::Direct {
                projection: ProjectionConfig {
                    qbar,
                    ..projection.clone()
                },
            },
            EstimatorSpec::Em { components, .. } => EstimatorSpec::Em {
                components: *components,
                qbar,
            },
            other => other.clone(),
        }
    }
}

/// A fitted estimate.
#[derive(Debug, Clone)]
pub enum Fitted {
    Pilot(PilotDensity),
    Mixture(GaussianMixture, Option<ProjectionTrace>),
}

impl Fitted {
    pub fn mixture(&self) -> Option<&GaussianMixture> {
        match self {
            Fitted::Mixture(m, _) => Some(m),
            Fitted::Pilot(_) => None,
        }
    }

    pub fn trace(&self) -> Option<&ProjectionTrace> {
        match self {
            Fitted::Mixture(_, t) => t.as_ref(),
            Fitted::Pilot(_) => None,
        }
    }

    /// Grid ISE for `d ≤ 2`, Monte-Carlo ISE otherwise.
    pub fn ise(&self, truth: &TrueDensity, mc_draws: usize, mc_seed: u64) -> Result<f64> {
        if truth.dim() <= 2 {
            return Ok(ise_grid(self, truth, &default_ise_grid(truth)?)?.ise);
        }
        self.ise_with(truth, None, mc_draws, mc_seed)
    }

    /// As [`Fitted::ise`], using `table` for planar truths when given.
    pub fn ise_with(
        &self,
        truth: &TrueDensity,
        table: Option<&TruthTable>,
        mc_draws: usize,
        mc_seed: u64,
    ) -> Result<f64> {
        if truth.dim() <= 2 {
            return match table {
                Some(t) => Ok(t.ise(self)?.ise),
                None => self.ise(truth, mc_draws, mc_seed),
            };
        }
        Ok(match self {
            Fitted::Pilot(p) => ise_mc_pilot(p, truth, mc_draws, mc_seed)?.ise,
            Fitted::Mixture(m, _) => ise_mc(m, truth, mc_draws, mc_seed)?.ise,
        })
    }
}

impl Density for Fitted {
    fn dim(&self) -> usize {
        match self {
            Fitted::Pilot(p) => p.dim(),
            Fitted::Mixture(m, _) => m.dim(),
        }
    }

    fn density(&self, x: &[f64]) -> f64 {
        match self {
            Fitted::Pilot(p) => p.density(x),
            Fitted::Mixture(m, _) => m.density(x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub label: String,
    pub estimator: EstimatorSpec,
}

impl MethodSpec {
    pub fn new(label: impl Into<String>, estimator: EstimatorSpec) -> Self {
        MethodSpec {
            label: label.into(),
            estimator,
        }
    }
}

/// Default bin-width rule: `(IQ)_j n^{-1/4}` in the plane and
/// `2 (IQ)_j n^{-1/(2d)}` otherwise.
pub fn default_width_rule(d: usize) -> BandwidthRule {
    if d <= 2 {
        BandwidthRule::IqrQuarter { c: 1.0 }
    } else {
        BandwidthRule::Iqr2d { c: 2.0 }
    }
}

/// Shared variance for the five-dimensional study. The planar default 0.7
/// exceeds every marginal variance of that truth.
pub const HIGH_DIM_QBAR: f64 = 0.35;

pub const DEFAULT_PERTURB_FRACTION: f64 = 0.25;
pub const DEFAULT_PERTURB_COUNT: usize = 5;

/// Pilots, their projections, direct projection and EM for one dimension.
pub fn default_methods(d: usize, components: usize, qbar: f64) -> Vec<MethodSpec> {
    let width = default_width_rule(d);
    let hist = PilotSpec::Histogram {
        width: width.clone(),
    };
    let pert = PilotSpec::Perturbed {
        width: width.clone(),
        fraction: DEFAULT_PERTURB_FRACTION,
        count: DEFAULT_PERTURB_COUNT,
    };
    let proj = ProjectionConfig::new(components, qbar);
    let mut out = vec![
        MethodSpec::new(
            "hist",
            EstimatorSpec::Pilot {
                pilot: hist.clone(),
            },
        ),
        MethodSpec::new(
            "perturbed",
            EstimatorSpec::Pilot {
                pilot: pert.clone(),
            },
        ),
        MethodSpec::new(
            "spe-hist",
            EstimatorSpec::Spe {
                pilot: hist,
                projection: proj.clone(),
            },
        ),
        MethodSpec::new(
            "spe-perturbed",
            EstimatorSpec::Spe {
                pilot: pert,
                projection: proj.clone(),
            },
        ),
    ];
    if d > 2 {
        let graph = PilotSpec::Graphical { width };
        out.push(MethodSpec::new(
            "graphical",
            EstimatorSpec::Pilot {
                pilot: graph.clone(),
            },
        ));
        out.push(MethodSpec::new(
            "spe-graphical",
            EstimatorSpec::Spe {
                pilot: graph,
                projection: proj.clone(),
            },
        ));
    } else {
        let lscv = PilotSpec::Kde {
            bandwidth: BandwidthRule::Lscv { grid: None },
        };
        out.push(MethodSpec::new(
            "kde-cv",
            EstimatorSpec::Pilot { pilot: lscv },
        ));
    }
    out.push(MethodSpec::new(
        "direct",
        EstimatorSpec::Direct { projection: proj },
    ));
    out.push(MethodSpec::new(
        "em",
        EstimatorSpec::Em { components, qbar },
    ));
    out
}

/// Seed of the sample for one (scenario, n, rep).
pub fn sample_seed(run_seed: u64, scenario: Scenario, n: usize, rep: usize) -> u64 {
    let s = Scenario::ALL
        .iter()
        .position(|x| *x == scenario)
        .expect("listed scenario") as u64;
    seed::child_seed(
        seed::child_seed(seed::child_seed(run_seed, s), n as u64),
        rep as u64,
    )
}

fn fit_seed(sample_seed: u64) -> u64 {
    seed::child_seed(sample_seed, 1)
}

fn mc_seed(sample_seed: u64) -> u64 {
    seed::child_seed(sample_seed, 2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub scenarios: Vec<Scenario>,
    pub ns: Vec<usize>,
    pub methods: Vec<MethodSpec>,
    pub reps: usize,
    pub seed: u64,
    pub mc_draws: usize,
}

impl BenchConfig {
    pub fn validate(&self) -> Result<()> {
        if self.scenarios.is_empty() || self.ns.is_empty() || self.methods.is_empty() {
            return Err(invalid(
                "scenarios, sample sizes and methods must all be nonempty",
            ));
        }
        if self.reps == 0 {
            return Err(invalid("reps must be at least 1"));
        }
        if self.ns.iter().any(|n| *n < 2) {
            return Err(invalid("sample sizes must be at least 2"));
        }
        let mut labels: Vec<&str> = self.methods.iter().map(|m| m.label.as_str()).collect();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return Err(invalid("method labels must be unique"));
        }
        Ok(())
    }
}

/// A (scenario, method, n, rep) cell that produced no value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellFailure {
    pub scenario: String,
    pub method: String,
    pub n: usize,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchOutput {
    pub records: Vec<IseRecord>,
    pub failures: Vec<CellFailure>,
}

impl BenchOutput {
    pub fn ise_of(&self, scenario: Scenario, method: &str, n: usize) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.scenario == scenario.label() && r.method == method && r.n == n)
            .map(|r| r.ise)
            .collect()
    }

    pub fn median_ise(&self, scenario: Scenario, method: &str, n: usize) -> f64 {
        median(&self.ise_of(scenario, method, n))
    }
}

/// Tabulates planar truths on their ISE grid.
fn truth_table(truth: &TrueDensity) -> Result<Option<TruthTable>> {
    if truth.dim() > 2 {
        return Ok(None);
    }
    Ok(Some(TruthTable::new(truth, default_ise_grid(truth)?)?))
}

fn run_methods(
    truth: &TrueDensity,
    table: Option<&TruthTable>,
    methods: &[MethodSpec],
    n: usize,
    sseed: u64,
    mc_draws: usize,
) -> (Vec<IseRecord>, Vec<CellFailure>) {
    let factorization = truth.factorization();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    let sample = match truth.sample(n, sseed) {
        Ok(s) => s,
        Err(e) => {
            for m in methods {
                failures.push(CellFailure {
                    scenario: truth.label().into(),
                    method: m.label.clone(),
                    n,
                    seed: sseed,
                    error: e.to_string(),
                });
            }
            return (records, failures);
        }
    };
    for m in methods {
        let start = Instant::now();
        let result = m
            .estimator
            .fit(&sample, factorization.as_ref(), fit_seed(sseed))
            .and_then(|f| f.ise_with(truth, table, mc_draws, mc_seed(sseed)));
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        match result {
            Ok(ise) => records.push(IseRecord {
                scenario: truth.label().into(),
                method: m.label.clone(),
                n,
                seed: sseed,
                ise,
                wall_ms,
            }),
            Err(e) => {
                log::warn!(
                    "{} / {} / n={n} / seed {sseed}: {e}",
                    truth.label(),
                    m.label
                );
                failures.push(CellFailure {
                    scenario: truth.label().into(),
                    method: m.label.clone(),
                    n,
                    seed: sseed,
                    error: e.to_string(),
                });
            }
        }
    }
    (records, failures)
}

/// Every method on every (scenario, n, rep) sample.
pub fn run_benchmark(cfg: &BenchConfig) -> Result<BenchOutput> {
    cfg.validate()?;
    let mut tasks = Vec::new();
    for sc in &cfg.scenarios {
        for n in &cfg.ns {
            for rep in 0..cfg.reps {
                tasks.push((*sc, *n, rep));
            }
        }
    }
    let truths: Vec<(Scenario, TrueDensity, Option<TruthTable>)> = cfg
        .scenarios
        .iter()
        .map(|s| {
            let t = s.truth();
            truth_table(&t).map(|table| (*s, t, table))
        })
        .collect::<Result<_>>()?;
    let parts: Vec<(Vec<IseRecord>, Vec<CellFailure>)> = tasks
        .par_iter()
        .map(|(sc, n, rep)| {
            let (_, truth, table) = truths
                .iter()
                .find(|(s, _, _)| s == sc)
                .expect("truth built");
            run_methods(
                truth,
                table.as_ref(),
                &cfg.methods,
                *n,
                sample_seed(cfg.seed, *sc, *n, *rep),
                cfg.mc_draws,
            )
        })
        .collect();
    let mut out = BenchOutput::default();
    for (r, f) in parts {
        out.records.extend(r);
        out.failures.extend(f);
    }
    Ok(out)
}

/// Bin-width constants `0.05, 0.10, …, 2.00`.
pub fn width_sweep_values() -> Vec<f64> {
    (1..=40).map(|k| k as f64 * 0.05).collect()
}

/// Mixture scales `0.40, 0.45, …, 2.00`.
pub fn qbar_sweep_values() -> Vec<f64> {
    (8..=40).map(|k| k as f64 * 0.05).collect()
}

/// One replication of one method at one sweep setting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub c: f64,
    pub qbar: Option<f64>,
    pub record: IseRecord,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub records: Vec<SweepRecord>,
    pub failures: Vec<CellFailure>,
}

pub const SWEEP_CSV_HEADER: &str = "scenario,method,n,seed,c,qbar,ise,sqrt_ise,wall_ms";

impl SweepOutput {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(SWEEP_CSV_HEADER);
        out.push('\n');
        for s in &self.records {
            let r = &s.record;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                r.scenario,
                r.method,
                r.n,
                r.seed,
                fmt_f64(s.c),
                s.qbar.map(fmt_f64).unwrap_or_default(),
                fmt_f64(r.ise),
                fmt_f64(r.sqrt_ise()),
                fmt_f64(r.wall_ms)
            ));
        }
        out
    }

    /// Median ISE per sweep setting of one method, in sweep order.
    pub fn medians(&self, method: &str) -> Vec<(f64, Option<f64>, f64)> {
        let mut keys: Vec<(f64, Option<f64>)> = Vec::new();
        for s in self.records.iter().filter(|s| s.record.method == method) {
            if !keys.contains(&(s.c, s.qbar)) {
                keys.push((s.c, s.qbar));
            }
        }
        keys.into_iter()
            .map(|(c, q)| {
                let v: Vec<f64> = self
                    .records
                    .iter()
                    .filter(|s| s.record.method == method && s.c == c && s.qbar == q)
                    .map(|s| s.record.ise)
                    .collect();
                (c, q, median(&v))
            })
            .collect()
    }

    /// `max / min` over sweep settings of the per-setting median ISE.
    pub fn median_spread(&self, method: &str) -> f64 {
        let m: Vec<f64> = self
            .medians(method)
            .into_iter()
            .map(|(_, _, v)| v)
            .collect();
        let max = m.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = m.iter().cloned().fold(f64::INFINITY, f64::min);
        max / min
    }
}

/// Width sweep, or a width × scale heatmap when `qbars` is given. Each sweep
/// setting reuses the same samples.
pub fn run_sweep(
    scenario: Scenario,
    n: usize,
    reps: usize,
    run_seed: u64,
    methods: &[MethodSpec],
    cs: &[f64],
    qbars: Option<&[f64]>,
    mc_draws: usize,
) -> Result<SweepOutput> {
    if reps == 0 || cs.is_empty() || methods.is_empty() {
        return Err(invalid("sweep needs reps, width constants and methods"));
    }
    let truth = scenario.truth();
    let table = truth_table(&truth)?;
    let qs: Vec<Option<f64>> = match qbars {
        Some(q) if !q.is_empty() => q.iter().map(|v| Some(*v)).collect(),
        Some(_) => return Err(invalid("scale sweep is empty")),
        None => vec![None],
    };
    let mut tasks = Vec::new();
    for c in cs {
        for q in &qs {
            for rep in 0..reps {
                tasks.push((*c, *q, rep));
            }
        }
    }
    let parts: Vec<(Vec<SweepRecord>, Vec<CellFailure>)> = tasks
        .par_iter()
        .map(|(c, q, rep)| {
            let cell: Vec<MethodSpec> = methods
                .iter()
                .map(|m| {
                    let e = m.estimator.with_width_c(*c);
                    let e = match q {
                        Some(q) => e.with_qbar(*q),
                        None => e,
                    };
                    MethodSpec::new(m.label.clone(), e)
                })
                .collect();
            let (recs, fails) = run_methods(
                &truth,
                table.as_ref(),
                &cell,
                n,
                sample_seed(run_seed, scenario, n, *rep),
                mc_draws,
            );
            (
                recs.into_iter()
                    .map(|record| SweepRecord {
                        c: *c,
                        qbar: *q,
                        record,
                    })
                    .collect(),
                fails,
            )
        })
        .collect();
    let mut out = SweepOutput::default();
    for (r, f) in parts {
        out.records.extend(r);
        out.failures.extend(f);
    }
    Ok(out)
}

/// Direct projection against the histogram-pilot projection on one sample.
#[derive(Debug, Clone)]
pub struct PathologyRun {
    pub seed: u64,
    pub sample: Sample,
    pub spe: GaussianMixture,
    pub direct: GaussianMixture,
    /// Mass each estimate puts on the truth's central half-mass set.
    pub spe_mass: f64,
    pub direct_mass: f64,
}

/// The truth's central half-mass set on its ISE grid.
pub fn central_region(truth: &TrueDensity) -> Result<Region> {
    half_mass_region(truth, &default_ise_grid(truth)?)
}

pub fn pathology_run(
    truth: &TrueDensity,
    region: &Region,
    n: usize,
    cfg: &ProjectionConfig,
    width: &BandwidthRule,
    sample_seed: u64,
) -> Result<PathologyRun> {
    let sample = truth.sample(n, sample_seed)?;
    let pilot = PilotSpec::Histogram {
        width: width.clone(),
    }
    .fit(&sample, None, fit_seed(sample_seed))?;
    let (spe, _) = project(&pilot, &sample, cfg)?;
    let (direct, _) = direct_project(&sample, cfg)?;
    let spe_mass = mass_in_region(&spe, region)?.mass;
    let direct_mass = mass_in_region(&direct, region)?.mass;
    Ok(PathologyRun {
        seed: sample_seed,
        sample,
        spe,
        direct,
        spe_mass,
        direct_mass,
    })
}

/// Grid evaluation CSV with header `x1[,x2,…],density`.
pub fn grid_csv(f: &dyn Density, grid: &EvalGrid) -> String {
    let mut out = String::new();
    let names: Vec<String> = (1..=grid.dim()).map(|j| format!("x{j}")).collect();
    out.push_str(&names.join(","));
    out.push_str(",density\n");
    for p in grid.points() {
        for v in p {
            out.push_str(&fmt_f64(*v));
            out.push(',');
        }
        out.push_str(&fmt_f64(f.density(p)));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_grids_have_expected_sizes() {
        let c = width_sweep_values();
        let q = qbar_sweep_values();
        assert_eq!(c.len(), 40);
        assert_eq!(q.len(), 33);
        assert!((c[0] - 0.05).abs() < 1e-15 && (c[39] - 2.0).abs() < 1e-15);
        assert!((q[0] - 0.4).abs() < 1e-15 && (q[32] - 2.0).abs() < 1e-15);
        assert_eq!(c.len() * q.len(), 1320);
    }

    #[test]
    fn smoke_run_has_one_row_per_method() {
        let cfg = BenchConfig {
            scenarios: vec![Scenario::GammaIndep],
            ns: vec![50],
            methods: default_methods(2, 4, 0.7),
            reps: 1,
            seed: 5,
            mc_draws: 1000,
        };
        let out = run_benchmark(&cfg).unwrap();
        assert!(out.failures.is_empty(), "{:?}", out.failures);
        assert_eq!(out.records.len(), cfg.methods.len());
        assert!(out
            .records
            .iter()
            .all(|r| r.ise.is_finite() && r.ise >= 0.0));
        let again = run_benchmark(&cfg).unwrap();
        let a: Vec<f64> = out.records.iter().map(|r| r.ise).collect();
        let b: Vec<f64> = again.records.iter().map(|r| r.ise).collect();
        assert_eq!(a, b);
    }

    #[test]
    fn duplicate_labels_rejected() {
        let mut m = default_methods(2, 4, 0.7);
        m[1].label = m[0].label.clone();
        let cfg = BenchConfig {
            scenarios: vec![Scenario::Ring],
            ns: vec![50],
            methods: m,
            reps: 1,
            seed: 0,
            mc_draws: 10,
        };
        assert!(run_benchmark(&cfg).is_err());
    }

    #[test]
    fn width_override_reaches_the_rule() {
        let e = default_methods(2, 4, 0.7)[3]
            .estimator
            .with_width_c(0.3)
            .with_qbar(1.1);
        match e {
            EstimatorSpec::Spe {
                pilot: PilotSpec::Perturbed { width, .. },
                projection,
            } => {
                assert_eq!(width, BandwidthRule::IqrQuarter { c: 0.3 });
                assert_eq!(projection.qbar, 1.1);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn grid_csv_header() {
        let m = GaussianMixture::single(vec![0.0, 0.0], 1.0).unwrap();
        let g = EvalGrid::cube(-1.0, 1.0, 2, 2).unwrap();
        let csv = grid_csv(&m, &g);
        assert!(csv.starts_with("x1,x2,density\n"));
        assert_eq!(csv.lines().count(), 5);
    }
}
