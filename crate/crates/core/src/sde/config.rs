use crate::error::{invalid, Result};

/// Time stepping and sampling parameters shared by all samplers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryConfig {
    pub dt: f64,
    /// Production steps (after burn-in).
    pub steps: u64,
    pub seed: u64,
    pub burn_in: u64,
    pub thinning: u64,
    /// Any coordinate beyond this magnitude aborts the run.
    pub overflow_guard: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig { dt: 1e-3, steps: 1_000_000, seed: 0, burn_in: 1_000_000, thinning: 1000, overflow_guard: 1e6 }
    }
}

impl TrajectoryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return invalid(format!("dt must be positive, got {}", self.dt));
        }
        if self.thinning < 1 {
            return invalid("thinning must be at least 1");
        }
        if !(self.overflow_guard > 0.0) {
            return invalid("overflow_guard must be positive");
        }
        Ok(())
    }
}

/// Equilibrium sampler for conditional averages.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sampler {
    /// Plain Euler-Maruyama; its invariant law carries an O(dt) bias.
    EulerMaruyama,
    /// Euler-Maruyama proposals with a Metropolis correction (exact invariant law).
    Mala,
}

impl Sampler {
    pub fn name(&self) -> &'static str {
        match self {
            Sampler::EulerMaruyama => "euler-maruyama",
            Sampler::Mala => "mala",
        }
    }
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "euler-maruyama" | "em" => Some(Sampler::EulerMaruyama),
            "mala" => Some(Sampler::Mala),
            _ => None,
        }
    }
}
