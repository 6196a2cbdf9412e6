use anyhow::{bail, Result};
use clap::Args;
use serde::{Deserialize, Serialize};

use spe::bench::{central_region, default_width_rule, grid_csv, pathology_run, sample_seed};
use spe::datagen::Scenario;
use spe::metrics::median;
use spe::projection::ProjectionConfig;
use spe::sample::fmt_f64;
use spe::EvalGrid;

use super::Status;
use crate::config;
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Args)]
pub struct PathologyArgs {
    /// Grid cells per axis of the evaluation CSVs.
    #[arg(long)]
    pub grid_cells: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Setup {
    pub scenario: Scenario,
    pub n: usize,
    pub components: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathologyConfig {
    pub setups: Vec<Setup>,
    pub qbar: f64,
    /// Number of seeded samples per setup.
    pub reps: usize,
    pub seed: u64,
    pub grid_cells: usize,
}

impl Default for PathologyConfig {
    fn default() -> Self {
        PathologyConfig {
            setups: vec![
                Setup {
                    scenario: Scenario::GammaIndep,
                    n: 250,
                    components: 64,
                },
                Setup {
                    scenario: Scenario::Ring,
                    n: 1000,
                    components: 16,
                },
                Setup {
                    scenario: Scenario::Ring,
                    n: 1000,
                    components: 25,
                },
            ],
            qbar: 0.7,
            reps: 20,
            seed: 0,
            grid_cells: 128,
        }
    }
}

#[derive(Debug, Serialize)]
struct SetupSummary {
    scenario: Scenario,
    n: usize,
    components: usize,
    reps: usize,
    median_spe_mass: f64,
    median_direct_mass: f64,
}

pub fn run(global: &GlobalArgs, args: &PathologyArgs) -> Result<Status> {
    let mut cfg: PathologyConfig = config::load(global.config.as_deref())?;
    if let Some(r) = global.reps {
        cfg.reps = r;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.grid_cells {
        cfg.grid_cells = c;
    }
    if cfg.reps == 0 || cfg.setups.is_empty() || cfg.grid_cells == 0 {
        bail!("need at least one setup, one rep and one grid cell");
    }
    let mut out = Outputs::default();
    let mut csv = String::from("scenario,n,components,seed,spe_mass,direct_mass\n");
    let mut summary = Vec::new();
    for setup in &cfg.setups {
        let truth = setup.scenario.truth();
        if truth.dim() != 2 {
            bail!(
                "the demonstration needs a planar scenario, got {}",
                setup.scenario
            );
        }
        let region = central_region(&truth)?;
        let proj = ProjectionConfig::new(setup.components, cfg.qbar);
        let width = default_width_rule(2);
        let mut spe_mass = Vec::new();
        let mut direct_mass = Vec::new();
        for rep in 0..cfg.reps {
            let seed = sample_seed(cfg.seed, setup.scenario, setup.n, rep);
            let run = pathology_run(&truth, &region, setup.n, &proj, &width, seed)?;
            csv.push_str(&format!(
                "{},{},{},{},{},{}\n",
                setup.scenario,
                setup.n,
                setup.components,
                seed,
                fmt_f64(run.spe_mass),
                fmt_f64(run.direct_mass)
            ));
            if rep == 0 {
                let (lo, hi) = truth.ise_box();
                let grid = EvalGrid::regular(&lo, &hi, &[cfg.grid_cells; 2])?;
                let stem = format!("{}_n{}_S{}", setup.scenario, setup.n, setup.components);
                out.text(format!("grid_{stem}_spe.csv"), grid_csv(&run.spe, &grid));
                out.text(
                    format!("grid_{stem}_direct.csv"),
                    grid_csv(&run.direct, &grid),
                );
                out.text(format!("sample_{stem}.csv"), run.sample.to_csv_string());
            }
            spe_mass.push(run.spe_mass);
            direct_mass.push(run.direct_mass);
        }
        summary.push(SetupSummary {
            scenario: setup.scenario,
            n: setup.n,
            components: setup.components,
            reps: cfg.reps,
            median_spe_mass: median(&spe_mass),
            median_direct_mass: median(&direct_mass),
        });
    }
    out.text("masses.csv", csv);
    out.json("summary.json", &summary)?;
    out.commit(&global.out)?;
    Ok(Status::Complete)
}
