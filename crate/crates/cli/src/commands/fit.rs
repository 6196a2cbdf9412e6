use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};

use spe::bench::{
    default_width_rule, grid_csv, EstimatorSpec, Fitted, PilotSpec, DEFAULT_PERTURB_COUNT,
    DEFAULT_PERTURB_FRACTION,
};
use spe::datagen::Scenario;
use spe::pilots::{BandwidthRule, GraphicalFactorization};
use spe::projection::{ProjectionConfig, TraceFlag};
use spe::{EvalGrid, GaussianMixture, PilotDensity, Sample};

use super::Status;
use crate::config;
use crate::output::Outputs;
use crate::GlobalArgs;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Spe,
    Pilot,
    Direct,
    Em,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PilotArg {
    Histogram,
    Perturbed,
    Graphical,
    KdeCv,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Simulation scenario to draw the sample from.
    #[arg(long, value_parser = parse_scenario, conflicts_with = "input")]
    pub scenario: Option<Scenario>,
    /// Headerless CSV sample, one row per observation.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Sample size drawn from the scenario.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long, value_enum)]
    pub pilot: Option<PilotArg>,
    /// Number of mixture components S.
    #[arg(long)]
    pub components: Option<usize>,
    /// Shared component variance q̄.
    #[arg(long)]
    pub qbar: Option<f64>,
    /// Log-concavity penalty weight (projection methods, d ≤ 2).
    #[arg(long)]
    pub penalty: Option<f64>,
    /// Grid cells per axis of the evaluation CSV.
    #[arg(long)]
    pub grid_cells: Option<usize>,
}

pub fn parse_scenario(s: &str) -> Result<Scenario, String> {
    s.parse().map_err(|e: spe::Error| e.to_string())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitConfig {
    pub scenario: Option<Scenario>,
    pub input: Option<PathBuf>,
    pub n: usize,
    pub seed: u64,
    /// Estimator; the default is a histogram-pilot projection.
    pub estimator: Option<EstimatorSpec>,
    pub grid_cells: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            scenario: None,
            input: None,
            n: 250,
            seed: 0,
            estimator: None,
            grid_cells: 128,
        }
    }
}

fn pilot_for(arg: PilotArg, d: usize) -> PilotSpec {
    let width = default_width_rule(d);
    match arg {
        PilotArg::Histogram => PilotSpec::Histogram { width },
        PilotArg::Perturbed => PilotSpec::Perturbed {
            width,
            fraction: DEFAULT_PERTURB_FRACTION,
            count: DEFAULT_PERTURB_COUNT,
        },
        PilotArg::Graphical => PilotSpec::Graphical { width },
        PilotArg::KdeCv => PilotSpec::Kde {
            bandwidth: BandwidthRule::Lscv { grid: None },
        },
    }
}

fn resolve_estimator(
    cfg: Option<EstimatorSpec>,
    args: &FitArgs,
    d: usize,
) -> Result<EstimatorSpec> {
    let default_proj = ProjectionConfig::new(64, 0.7);
    let mut est = cfg.unwrap_or_else(|| EstimatorSpec::Spe {
        pilot: PilotSpec::Histogram {
            width: default_width_rule(d),
        },
        projection: default_proj.clone(),
    });
    if args.method.is_some() || args.pilot.is_some() {
        let (cur_pilot, cur_proj) = match &est {
            EstimatorSpec::Pilot { pilot } => (Some(pilot.clone()), None),
            EstimatorSpec::Spe { pilot, projection } => {
                (Some(pilot.clone()), Some(projection.clone()))
            }
            EstimatorSpec::Direct { projection } => (None, Some(projection.clone())),
            EstimatorSpec::Em { components, qbar } => {
                (None, Some(ProjectionConfig::new(*components, *qbar)))
            }
        };
        let pilot = match args.pilot {
            Some(p) => pilot_for(p, d),
            None => cur_pilot.unwrap_or_else(|| pilot_for(PilotArg::Histogram, d)),
        };
        let proj = cur_proj.unwrap_or(default_proj);
        let method = args.method.unwrap_or(match est {
            EstimatorSpec::Pilot { .. } => MethodArg::Pilot,
            EstimatorSpec::Direct { .. } => MethodArg::Direct,
            EstimatorSpec::Em { .. } => MethodArg::Em,
            EstimatorSpec::Spe { .. } => MethodArg::Spe,
        });
        if args.pilot.is_some() && matches!(method, MethodArg::Direct | MethodArg::Em) {
            bail!("--pilot applies only to the spe and pilot methods");
        }
        est = match method {
            MethodArg::Spe => EstimatorSpec::Spe {
                pilot,
                projection: proj,
            },
            MethodArg::Pilot => EstimatorSpec::Pilot { pilot },
            MethodArg::Direct => EstimatorSpec::Direct { projection: proj },
            MethodArg::Em => EstimatorSpec::Em {
                components: proj.components,
                qbar: proj.qbar,
            },
        };
    }
    match &mut est {
        EstimatorSpec::Spe { projection, .. } | EstimatorSpec::Direct { projection } => {
            if let Some(s) = args.components {
                projection.components = s;
            }
            if let Some(q) = args.qbar {
                projection.qbar = q;
            }
            if let Some(w) = args.penalty {
                projection.penalty_weight = w;
            }
            projection
                .validate()
                .context("invalid projection settings")?;
        }
        EstimatorSpec::Em { components, qbar } => {
            if let Some(s) = args.components {
                *components = s;
            }
            if let Some(q) = args.qbar {
                *qbar = q;
            }
            if args.penalty.is_some() {
                bail!("--penalty applies only to projection methods");
            }
        }
        EstimatorSpec::Pilot { .. } => {
            if args.components.is_some() || args.qbar.is_some() || args.penalty.is_some() {
                bail!("--components, --qbar and --penalty do not apply to a bare pilot");
            }
        }
    }
    Ok(est)
}

#[derive(Debug, Serialize)]
struct BinJson {
    index: Vec<i64>,
    mass: f64,
}

#[derive(Debug, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
enum PilotJson {
    Histogram {
        anchor: Vec<f64>,
        widths: Vec<f64>,
        bins: Vec<BinJson>,
    },
    Perturbed {
        members: Vec<PilotJson>,
    },
    Graphical {
        widths: Vec<f64>,
        factorization: GraphicalFactorization,
    },
    Kde {
        bandwidth: f64,
    },
    Tabulated,
}

fn histogram_json(h: &spe::pilots::HistogramEstimate) -> PilotJson {
    PilotJson::Histogram {
        anchor: h.anchor().to_vec(),
        widths: h.widths().to_vec(),
        bins: h
            .bins()
            .map(|(k, m)| BinJson {
                index: k.to_vec(),
                mass: m,
            })
            .collect(),
    }
}

fn pilot_json(p: &PilotDensity) -> PilotJson {
    match p {
        PilotDensity::Histogram(h) => histogram_json(h),
        PilotDensity::Perturbed(p) => PilotJson::Perturbed {
            members: p.members().iter().map(histogram_json).collect(),
        },
        PilotDensity::Graphical(g) => PilotJson::Graphical {
            widths: g.widths().to_vec(),
            factorization: g.factorization().clone(),
        },
        PilotDensity::Kde(k) => PilotJson::Kde {
            bandwidth: k.bandwidth(),
        },
        PilotDensity::Tabulated(_) => PilotJson::Tabulated,
    }
}

#[derive(Debug, Serialize)]
struct TraceJson<'a> {
    criterion: &'a [f64],
    penalty: &'a [f64],
    converged: bool,
    iterations: usize,
    flags: &'a [TraceFlag],
}

#[derive(Debug, Serialize)]
struct FitJson<'a> {
    source: String,
    n: usize,
    dim: usize,
    seed: u64,
    estimator: &'a EstimatorSpec,
    mixture: Option<&'a GaussianMixture>,
    pilot: Option<PilotJson>,
    trace: Option<TraceJson<'a>>,
    ise: Option<f64>,
}

/// Evaluation grid: the scenario's ISE box, or the data range padded by a
/// tenth of its width.
fn plot_grid(scenario: Option<Scenario>, sample: &Sample, cells: usize) -> Result<EvalGrid> {
    let (lo, hi) = match scenario {
        Some(s) => s.truth().ise_box(),
        None => sample
            .bounds()
            .into_iter()
            .map(|(a, b)| {
                let pad = 0.1 * (b - a).max(1e-3);
                (a - pad, b + pad)
            })
            .unzip(),
    };
    Ok(EvalGrid::regular(&lo, &hi, &vec![cells; sample.dim()])?)
}

pub fn run(global: &GlobalArgs, args: &FitArgs) -> Result<Status> {
    let mut cfg: FitConfig = config::load(global.config.as_deref())?;
    if let Some(s) = args.scenario {
        cfg.scenario = Some(s);
        cfg.input = None;
    }
    if let Some(p) = &args.input {
        cfg.input = Some(p.clone());
        cfg.scenario = None;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(s) = global.seed {
        cfg.seed = s;
    }
    if let Some(c) = args.grid_cells {
        cfg.grid_cells = c;
    }
    if cfg.grid_cells == 0 {
        bail!("grid cells must be positive");
    }
    if cfg.scenario.is_some() && cfg.input.is_some() {
        bail!("give either a scenario or an input file, not both");
    }
    let (sample, source, truth) = match (&cfg.input, cfg.scenario) {
        (Some(path), _) => {
            if !path.exists() {
                bail!("input file {} does not exist", path.display());
            }
            (
                Sample::read_csv(path)?,
                format!("file {}", path.display()),
                None,
            )
        }
        (None, scenario) => {
            let sc = scenario.unwrap_or(Scenario::GammaIndep);
            cfg.scenario = Some(sc);
            let truth = sc.truth();
            (
                truth.sample(cfg.n, cfg.seed)?,
                format!("scenario {sc}"),
                Some(truth),
            )
        }
    };
    let d = sample.dim();
    let estimator = resolve_estimator(cfg.estimator.clone(), args, d)?;
    let factorization = truth.as_ref().and_then(|t| t.factorization());
    let fitted = estimator.fit(
        &sample,
        factorization.as_ref(),
        spe::seed::child_seed(cfg.seed, 1),
    )?;
    let ise = match &truth {
        Some(t) => Some(fitted.ise(
            t,
            spe::metrics::DEFAULT_MC_DRAWS,
            spe::seed::child_seed(cfg.seed, 2),
        )?),
        None => None,
    };
    let (mixture, pilot) = match &fitted {
        Fitted::Mixture(m, _) => (Some(m), None),
        Fitted::Pilot(p) => (None, Some(pilot_json(p))),
    };
    let trace = fitted.trace().map(|t| TraceJson {
        criterion: &t.criterion,
        penalty: &t.penalty,
        converged: t.converged,
        iterations: t.iterations,
        flags: &t.flags,
    });
    let summary = FitJson {
        source,
        n: sample.n(),
        dim: d,
        seed: cfg.seed,
        estimator: &estimator,
        mixture,
        pilot,
        trace,
        ise,
    };

    let mut out = Outputs::default();
    out.json("fit.json", &summary)?;
    out.text("sample.csv", sample.to_csv_string());
    if d <= 2 {
        out.text(
            "grid.csv",
            grid_csv(&fitted, &plot_grid(cfg.scenario, &sample, cfg.grid_cells)?),
        );
    }
    for p in out.commit(&global.out)? {
        log::info!("wrote {}", p.display());
    }
    Ok(Status::Complete)
}
