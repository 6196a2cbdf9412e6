use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use spe::classifier::{
    load_wdbc, run_wdbc_experiment, ClassEstimator, ClassifierReport, ExperimentConfig,
};
use spe::sample::fmt_f64;

use super::Status;
use crate::config;
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EstimatorArg {
    Spe,
    KdeCv,
    Constant,
}

impl EstimatorArg {
    fn spec(self) -> ClassEstimator {
        match self {
            EstimatorArg::Spe => ClassEstimator::spe_default(),
            EstimatorArg::KdeCv => ClassEstimator::KdeLscv,
            EstimatorArg::Constant => ClassEstimator::Constant,
        }
    }
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    /// UCI `wdbc.data` file.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run only this estimator (repeatable); default is spe and kde-cv.
    #[arg(long = "estimator", value_enum)]
    pub estimators: Vec<EstimatorArg>,
    /// Held-out rows per replication.
    #[arg(long)]
    pub test_size: Option<usize>,
    /// Fit on the raw features instead of standardized ones.
    #[arg(long)]
    pub raw: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifyConfig {
    pub data: PathBuf,
    pub estimators: Vec<ClassEstimator>,
    pub reps: usize,
    pub test_size: usize,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for ClassifyConfig {
    fn default() -> Self {
        ClassifyConfig {
            data: PathBuf::from("data/wdbc.data"),
            estimators: vec![ClassEstimator::spe_default(), ClassEstimator::KdeLscv],
            reps: 100,
            test_size: 50,
            seed: 0,
            standardize: true,
        }
    }
}

pub fn run(global: &GlobalArgs, args: &ClassifyArgs) -> Result<Status> {
    let mut cfg: ClassifyConfig = config::load(global.config.as_deref())?;
    if global.paper_scale {
        cfg.reps = 500;
    }
    if let Some(r) = global.reps {
        cfg.reps = r;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(p) = &args.data {
        cfg.data = p.clone();
    }
    if !args.estimators.is_empty() {
        cfg.estimators = args.estimators.iter().map(|e| e.spec()).collect();
    }
    if let Some(t) = args.test_size {
        cfg.test_size = t;
    }
    if args.raw {
        cfg.standardize = false;
    }
    if cfg.estimators.is_empty() {
        bail!("no estimators requested");
    }
    if !cfg.data.exists() {
        bail!("data file {} does not exist", cfg.data.display());
    }
    let ds = load_wdbc(&cfg.data)?;
    let mut reports: Vec<ClassifierReport> = Vec::new();
    for est in &cfg.estimators {
        let exp = ExperimentConfig {
            estimator: est.clone(),
            reps: cfg.reps,
            test_size: cfg.test_size,
            seed: cfg.seed,
            standardize: cfg.standardize,
        };
        reports.push(run_wdbc_experiment(&ds, &exp)?);
    }
    let mut out = Outputs::default();
    let mut table = String::from("method,reps,failed,mean,sd\n");
    let mut failed = 0;
    for r in &reports {
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            r.outcomes.len(),
            r.failed_reps,
            fmt_f64(r.mean),
            fmt_f64(r.sd)
        ));
        failed += r.failed_reps;
        out.json(format!("report_{}.json", r.method), r)?;
        out.text(format!("rates_{}.csv", r.method), r.rates_csv());
    }
    out.text("table.csv", table);
    out.commit(&global.out)?;
    Ok(Status::from_failures(failed))
}
