use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use spe::bench::{
    default_methods, default_width_rule, qbar_sweep_values, run_benchmark, run_sweep,
    width_sweep_values, BenchConfig, CellFailure, EstimatorSpec, MethodSpec, PilotSpec,
    DEFAULT_PERTURB_COUNT, DEFAULT_PERTURB_FRACTION, HIGH_DIM_QBAR,
};
use spe::datagen::Scenario;
use spe::metrics::{ise_records_csv, IseRecord, IseReport, DEFAULT_MC_DRAWS};
use spe::projection::ProjectionConfig;

use super::fit::parse_scenario;
use super::Status;
use crate::config;
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Bin-width constants 0.05..2.
    Width,
    /// Bin-width constants × scales 0.4..2.
    Heatmap,
}

#[derive(Debug, Args)]
pub struct BenchmarkArgs {
    /// Restrict to these scenarios (repeatable).
    #[arg(long = "scenario", value_parser = parse_scenario)]
    pub scenarios: Vec<Scenario>,
    /// Restrict to these sample sizes (repeatable).
    #[arg(long = "n")]
    pub ns: Vec<usize>,
    #[arg(long, value_enum)]
    pub sweep: Option<SweepKind>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkConfig {
    pub scenarios: Vec<Scenario>,
    pub ns: Vec<usize>,
    /// Components of the planar projections and EM.
    pub components: usize,
    /// Components in the five-dimensional scenario.
    pub high_dim_components: usize,
    pub qbar: f64,
    /// Shared variance in the five-dimensional scenario.
    pub high_dim_qbar: f64,
    /// Overrides the default method list for every scenario.
    pub methods: Option<Vec<MethodSpec>>,
    pub reps: usize,
    pub seed: u64,
    pub mc_draws: usize,
    pub sweep: Option<SweepKind>,
    pub sweep_scenario: Scenario,
    pub sweep_n: usize,
    /// Components of the projection in sweeps.
    pub sweep_components: usize,
    /// Overrides the perturbed pilot and its projection in sweeps.
    pub sweep_methods: Option<Vec<MethodSpec>>,
}

impl Default for BenchmarkConfig {
    fn default() -> Self {
        BenchmarkConfig {
            scenarios: Scenario::ALL.to_vec(),
            ns: vec![50, 100, 250, 500],
            components: 36,
            high_dim_components: 32,
            qbar: 0.7,
            high_dim_qbar: HIGH_DIM_QBAR,
            methods: None,
            reps: 100,
            seed: 0,
            mc_draws: DEFAULT_MC_DRAWS,
            sweep: None,
            sweep_scenario: Scenario::Ring,
            sweep_n: 100,
            sweep_components: 64,
            sweep_methods: None,
        }
    }
}

fn sweep_methods(cfg: &BenchmarkConfig) -> Vec<MethodSpec> {
    if let Some(m) = &cfg.sweep_methods {
        return m.clone();
    }
    let d = cfg.sweep_scenario.truth().dim();
    let pilot = PilotSpec::Perturbed {
        width: default_width_rule(d),
        fraction: DEFAULT_PERTURB_FRACTION,
        count: DEFAULT_PERTURB_COUNT,
    };
    vec![
        MethodSpec::new(
            "perturbed",
            EstimatorSpec::Pilot {
                pilot: pilot.clone(),
            },
        ),
        MethodSpec::new(
            "spe-perturbed",
            EstimatorSpec::Spe {
                pilot,
                projection: ProjectionConfig::new(cfg.sweep_components, cfg.qbar),
            },
        ),
    ]
}

#[derive(Debug, Serialize)]
struct BenchSummary<'a> {
    config: &'a BenchmarkConfig,
    reports: Vec<IseReport>,
    failures: &'a [CellFailure],
}

#[derive(Debug, Serialize)]
struct SweepCell {
    method: String,
    c: f64,
    qbar: Option<f64>,
    median_ise: f64,
}

#[derive(Debug, Serialize)]
struct SweepSpread {
    method: String,
    /// Largest over smallest per-setting median ISE.
    max_over_min_median: f64,
}

#[derive(Debug, Serialize)]
struct SweepSummary<'a> {
    config: &'a BenchmarkConfig,
    cells: Vec<SweepCell>,
    spread: Vec<SweepSpread>,
    failures: &'a [CellFailure],
}

pub fn run(global: &GlobalArgs, args: &BenchmarkArgs) -> Result<Status> {
    let mut cfg: BenchmarkConfig = config::load(global.config.as_deref())?;
    if global.paper_scale {
        cfg.reps = 1000;
        cfg.ns = vec![50, 100, 250, 500];
    }
    if let Some(r) = global.reps {
        cfg.reps = r;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if !args.scenarios.is_empty() {
        cfg.scenarios = args.scenarios.clone();
    }
    if !args.ns.is_empty() {
        cfg.ns = args.ns.clone();
    }
    if args.sweep.is_some() {
        cfg.sweep = args.sweep;
    }
    if cfg.reps == 0 {
        bail!("reps must be at least 1");
    }
    let mut out = Outputs::default();
    let failed = match cfg.sweep {
        Some(kind) => {
            let methods = sweep_methods(&cfg);
            let cs = width_sweep_values();
            let qs = qbar_sweep_values();
            let qbars = (kind == SweepKind::Heatmap).then_some(qs.as_slice());
            let res = run_sweep(
                cfg.sweep_scenario,
                cfg.sweep_n,
                cfg.reps,
                cfg.seed,
                &methods,
                &cs,
                qbars,
                cfg.mc_draws,
            )?;
            let mut cells = Vec::new();
            let mut spread = Vec::new();
            for m in &methods {
                for (c, qbar, median_ise) in res.medians(&m.label) {
                    cells.push(SweepCell {
                        method: m.label.clone(),
                        c,
                        qbar,
                        median_ise,
                    });
                }
                spread.push(SweepSpread {
                    method: m.label.clone(),
                    max_over_min_median: res.median_spread(&m.label),
                });
            }
            out.text("sweep.csv", res.to_csv());
            out.json(
                "sweep_summary.json",
                &SweepSummary {
                    config: &cfg,
                    cells,
                    spread,
                    failures: &res.failures,
                },
            )?;
            res.failures.len()
        }
        None => {
            let mut records: Vec<IseRecord> = Vec::new();
            let mut failures: Vec<CellFailure> = Vec::new();
            for sc in &cfg.scenarios {
                let d = sc.truth().dim();
                let (s, q) = if d > 2 {
                    (cfg.high_dim_components, cfg.high_dim_qbar)
                } else {
                    (cfg.components, cfg.qbar)
                };
                let methods = cfg
                    .methods
                    .clone()
                    .unwrap_or_else(|| default_methods(d, s, q));
                let bench = BenchConfig {
                    scenarios: vec![*sc],
                    ns: cfg.ns.clone(),
                    methods,
                    reps: cfg.reps,
                    seed: cfg.seed,
                    mc_draws: cfg.mc_draws,
                };
                let res = run_benchmark(&bench)?;
                records.extend(res.records);
                failures.extend(res.failures);
            }
            out.text("ise.csv", ise_records_csv(&records));
            let reports = IseReport::from_records(&records);
            out.json(
                "summary.json",
                &BenchSummary {
                    config: &cfg,
                    reports,
                    failures: &failures,
                },
            )?;
            failures.len()
        }
    };
    out.commit(&global.out)?;
    Ok(Status::from_failures(failed))
}
