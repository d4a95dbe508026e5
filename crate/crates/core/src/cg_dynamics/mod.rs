//! Coarse-grained coefficients, one-dimensional dynamics and escape-time estimates.

mod bounds;
mod coefficients;
mod kramers;

pub use bounds::{entropy_bound_constants, local_mean_force, EntropyConstants};
pub use coefficients::{estimate_coefficients, make_sde, path_agreement, CoefPath, PathAgreement, CoefficientCi, CoefficientConfig, CoefficientTable};
pub use kramers::{fit_arrhenius, kramers_time, rescale_by_sigma, ArrheniusFit, KramersEstimate};
