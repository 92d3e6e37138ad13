//! Transport distances and entropy functionals on configuration measures.

mod assignment;
mod distance;
mod entropy;
mod inequalities;
mod simplex;
mod wasserstein;

pub use assignment::solve_assignment;
pub use distance::{
    check_config_metric, check_dirac_isometry, config_distance, config_matching, sector_squared_distances,
    ExtendedDistance, Matching,
};
pub use entropy::{
    check_entropy_dissipation, density, dissipation_form, entropy_flow, fisher_information, relative_entropy,
    EntropyFlowPoint, FisherInformation,
};
pub use inequalities::{check_entropy_cost, check_evi, check_kwc, EviDefects, EVI_STEP_FRACTIONS};
pub use simplex::{solve_transport, TransportSolution};
pub use wasserstein::{
    largest_sector, wasserstein_base, wasserstein_config, PlanStatus, TransportPlan, DESK_SCALE_LIMIT,
    SECTOR_MASS_TOL,
};
