//! Nonparametric pilot estimators and their smoothing rules.

pub mod bandwidth;
pub mod graphical;
pub mod histogram;
pub mod kde;
pub mod perturbed;
pub mod tabulated;

use serde::{Deserialize, Serialize};

pub use bandwidth::{iqr_binwidths, lscv_bandwidth, undersmoothed_bandwidth, BandwidthRule};
pub use graphical::{Factor, GraphicalFactorization, GraphicalHistogram};
pub use histogram::HistogramEstimate;
pub use kde::{kde_evaluate, Kde};
pub use perturbed::PerturbedHistogram;
pub use tabulated::TabulatedDensity;

use crate::density::{Density, SquaredNorm};
use crate::error::{Error, Result};
use crate::sample::Sample;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PilotKind {
    Histogram,
    PerturbedHistogram,
    GraphicalHistogram,
    Kde,
    Tabulated,
}

impl PilotKind {
    pub fn label(self) -> &'static str {
        match self {
            PilotKind::Histogram => "histogram",
            PilotKind::PerturbedHistogram => "perturbed-histogram",
            PilotKind::GraphicalHistogram => "graphical-histogram",
            PilotKind::Kde => "kde",
            PilotKind::Tabulated => "tabulated",
        }
    }
}

/// Any fitted pilot behind one evaluation interface.
#[derive(Debug, Clone)]
pub enum PilotDensity {
    Histogram(HistogramEstimate),
    Perturbed(PerturbedHistogram),
    Graphical(GraphicalHistogram),
    Kde(Kde),
    Tabulated(TabulatedDensity),
}

impl PilotDensity {
    pub fn kind(&self) -> PilotKind {
        match self {
            PilotDensity::Histogram(_) => PilotKind::Histogram,
            PilotDensity::Perturbed(_) => PilotKind::PerturbedHistogram,
            PilotDensity::Graphical(_) => PilotKind::GraphicalHistogram,
            PilotDensity::Kde(_) => PilotKind::Kde,
            PilotDensity::Tabulated(_) => PilotKind::Tabulated,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> f64 {
        match self {
            PilotDensity::Histogram(h) => h.evaluate(x),
            PilotDensity::Perturbed(p) => p.evaluate(x),
            PilotDensity::Graphical(g) => g.evaluate(x),
            PilotDensity::Kde(k) => k.evaluate(x),
            PilotDensity::Tabulated(t) => t.evaluate(x),
        }
    }

    /// Pilot values at every row of `sample`.
    pub fn evaluate_at(&self, sample: &Sample) -> Vec<f64> {
        sample.rows().map(|r| self.evaluate(r)).collect()
    }

    /// Closed-form distribution function where one exists.
    pub fn cdf(&self, t: &[f64]) -> Result<f64> {
        match self {
            PilotDensity::Histogram(h) => Ok(h.cdf(t)),
            PilotDensity::Perturbed(p) => Ok(p.cdf(t)),
            PilotDensity::Kde(k) => Ok(k.cdf(t)),
            PilotDensity::Graphical(_) | PilotDensity::Tabulated(_) => Err(Error::Unsupported(
                format!("no closed-form CDF for a {} pilot", self.kind().label()),
            )),
        }
    }

    /// Closed-form `∫ g²` where one exists.
    pub fn squared_l2_norm(&self) -> Result<f64> {
        match self {
            PilotDensity::Histogram(h) => Ok(h.squared_l2_norm()),
            PilotDensity::Perturbed(p) => Ok(p.squared_l2_norm()),
            PilotDensity::Graphical(g) => Ok(g.squared_l2_norm()),
            PilotDensity::Kde(k) => Ok(k.squared_l2_norm()),
            PilotDensity::Tabulated(_) => Err(Error::Unsupported(
                "no closed-form L2 norm for a tabulated pilot".into(),
            )),
        }
    }
}

impl Density for PilotDensity {
    fn dim(&self) -> usize {
        match self {
            PilotDensity::Histogram(h) => h.dim(),
            PilotDensity::Perturbed(p) => p.dim(),
            PilotDensity::Graphical(g) => g.dim(),
            PilotDensity::Kde(k) => Density::dim(k),
            PilotDensity::Tabulated(t) => t.dim(),
        }
    }

    fn density(&self, x: &[f64]) -> f64 {
        self.evaluate(x)
    }
}

impl From<HistogramEstimate> for PilotDensity {
    fn from(h: HistogramEstimate) -> Self {
        PilotDensity::Histogram(h)
    }
}

impl From<PerturbedHistogram> for PilotDensity {
    fn from(p: PerturbedHistogram) -> Self {
        PilotDensity::Perturbed(p)
    }
}

impl From<GraphicalHistogram> for PilotDensity {
    fn from(g: GraphicalHistogram) -> Self {
        PilotDensity::Graphical(g)
    }
}

impl From<Kde> for PilotDensity {
    fn from(k: Kde) -> Self {
        PilotDensity::Kde(k)
    }
}

impl From<TabulatedDensity> for PilotDensity {
    fn from(t: TabulatedDensity) -> Self {
        PilotDensity::Tabulated(t)
    }
}
