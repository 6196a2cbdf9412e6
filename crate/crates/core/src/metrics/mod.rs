//! Error metrics, distribution-function diagnostics and region masses.

mod cdf;
mod ise;
mod region;
mod report;

pub use cdf::{default_probes, sup_cdf_distance};
pub use ise::{
    default_ise_grid, ise_grid, ise_mc, ise_mc_pilot, GridIse, McIse, Truth, TruthTable,
    BOUNDARY_MASS_TOL, DEFAULT_GRID_CELLS, DEFAULT_MC_DRAWS,
};
pub use region::{
    box_mass_mc, half_mass_region, highest_density_cells, mass_in_region, Region, RegionMass,
};
pub use report::{
    ise_records_csv, median, summarize, IseRecord, IseReport, Summary, ISE_CSV_HEADER,
};
