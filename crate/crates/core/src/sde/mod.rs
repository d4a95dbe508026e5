//! Overdamped Langevin engines, well harvesting and residence times.

mod config;
mod engine;
mod residence;
mod sde1d;

pub use config::{Sampler, TrajectoryConfig};
pub use engine::{simulate_overdamped, Bias, Overdamped, Trajectory};
pub use residence::{
    harvest_well_samples, residence_times, Dynamics, DynamicsKind, HarvestResult, Initials, Region, ResidenceConfig,
    ResidenceTimeReport,
};
pub use sde1d::{Coef, Domain, Sde1d, Stepper};
