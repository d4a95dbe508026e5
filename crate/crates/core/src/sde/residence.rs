use super::engine::Overdamped;
use super::sde1d::Sde1d;
use super::TrajectoryConfig;
use crate::error::{Error, Result};
use crate::potentials::{wrap_angle, MolecularSystem, ReactionCoordinate};
use crate::rng::Stream;
use crate::stats;
use rayon::prelude::*;

/// A set of reaction-coordinate values.
#[derive(Clone, Debug, PartialEq)]
pub enum Region {
    /// xi >= t
    Above(f64),
    /// xi <= t
    Below(f64),
    /// wrapped angular distance to any centre at most `radius`
    NearAngles { centres: Vec<f64>, radius: f64 },
}

impl Region {
    #[inline]
    pub fn contains(&self, xi: f64) -> bool {
        match self {
            Region::Above(t) => xi >= *t,
            Region::Below(t) => xi <= *t,
            Region::NearAngles { centres, radius } => centres.iter().any(|c| wrap_angle(xi - c).abs() <= *radius),
        }
    }

    /// Parses `above:T`, `below:T` or `near:C1|C2|...:R`; numbers may be
    /// multiples of pi such as `2pi/3`.
    pub fn parse(spec: &str) -> Result<Self> {
        use crate::cli::parse_number;
        let bad = || Error::Config(format!("region '{spec}': expected above:T, below:T or near:C1|C2:R"));
        let p: Vec<&str> = spec.split(':').map(str::trim).collect();
        match p.as_slice() {
            ["above", t] => Ok(Region::Above(parse_number(t).ok_or_else(bad)?)),
            ["below", t] => Ok(Region::Below(parse_number(t).ok_or_else(bad)?)),
            ["near", c, r] => {
                let centres = c.split('|').map(|v| parse_number(v).ok_or_else(bad)).collect::<Result<Vec<_>>>()?;
                Ok(Region::NearAngles { centres, radius: parse_number(r).ok_or_else(bad)? })
            }
            _ => Err(bad()),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Region::Above(t) => format!("xi>={t}"),
            Region::Below(t) => format!("xi<={t}"),
            Region::NearAngles { centres, radius } => {
                let c: Vec<String> = centres.iter().map(|c| format!("{c:.6}")).collect();
                format!("|xi-c|<={radius} for c in {{{}}}", c.join(";"))
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct HarvestResult {
    pub states: Vec<Vec<f64>>,
    pub acceptance: f64,
}

/// Runs equilibrium dynamics from q0 and keeps every `thinning`-th state
/// (after burn-in) that lies in `well`, until `count` are collected.
pub fn harvest_well_samples(
    system: &MolecularSystem,
    rc: ReactionCoordinate,
    beta: f64,
    well: &Region,
    count: usize,
    cfg: &TrajectoryConfig,
    q0: &[f64],
) -> Result<HarvestResult> {
    cfg.validate()?;
    let mut eng = Overdamped::new(system, beta, cfg.dt, q0, cfg.seed, u64::MAX)?;
    for k in 0..cfg.burn_in {
        eng.step();
        if k % 4096 == 0 {
            eng.check(cfg.overflow_guard)?;
        }
    }
    let mut g = vec![0.0; system_dof(system)];
    let mut states = Vec::with_capacity(count);
    let mut checks = 0u64;
    while states.len() < count {
        for _ in 0..cfg.thinning {
            eng.step();
        }
        eng.check(cfg.overflow_guard)?;
        checks += 1;
        if well.contains(rc.eval(&eng.q, &mut g)) {
            states.push(eng.q.clone());
        }
        if checks >= 10_000 && (states.len() as f64) < 1e-4 * checks as f64 {
            return Err(Error::InsufficientSamples(format!(
                "well {} accepted {} of {checks} states",
                well.describe(),
                states.len()
            )));
        }
    }
    Ok(HarvestResult { acceptance: states.len() as f64 / checks as f64, states })
}

fn system_dof(s: &MolecularSystem) -> usize {
    use crate::potentials::Potential;
    s.dof()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DynamicsKind {
    Full,
    Effective,
    FreeEnergy,
}

impl DynamicsKind {
    pub fn name(&self) -> &'static str {
        match self {
            DynamicsKind::Full => "full",
            DynamicsKind::Effective => "effective",
            DynamicsKind::FreeEnergy => "free-energy",
        }
    }
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "full" => Some(DynamicsKind::Full),
            "effective" => Some(DynamicsKind::Effective),
            "free-energy" | "free" => Some(DynamicsKind::FreeEnergy),
            _ => None,
        }
    }
}

pub enum Dynamics<'a> {
    Full { system: &'a MolecularSystem, rc: ReactionCoordinate, beta: f64 },
    OneD { sde: &'a Sde1d, kind: DynamicsKind },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidenceConfig {
    pub dt: f64,
    pub seed: u64,
    /// Realizations still inside after this many steps are censored.
    pub step_cap: u64,
}

impl Default for ResidenceConfig {
    fn default() -> Self {
        ResidenceConfig { dt: 1e-3, seed: 0, step_cap: 1_000_000_000 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidenceTimeReport {
    pub kind: DynamicsKind,
    /// Uncensored realizations.
    pub n: usize,
    pub mean: f64,
    pub half_width_95: f64,
    pub censored: usize,
    pub exit: String,
    pub dt: f64,
    pub seed: u64,
    pub times: Vec<f64>,
}

pub enum Initials<'a> {
    Full(&'a [Vec<f64>]),
    OneD(&'a [f64]),
}

/// First time at which the exit region is reached, for every initial state;
/// realization i uses stream i.
pub fn residence_times(dynamics: &Dynamics, initials: Initials, exit: &Region, cfg: &ResidenceConfig) -> Result<ResidenceTimeReport> {
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidParameter("dt must be positive".into()));
    }
    let run = |i: usize| -> Result<Option<f64>> {
        match (dynamics, &initials) {
            (Dynamics::Full { system, rc, beta }, Initials::Full(qs)) => {
                let mut eng = Overdamped::new(*system, *beta, cfg.dt, &qs[i], cfg.seed, i as u64)?;
                let mut g = vec![0.0; qs[i].len()];
                for k in 1..=cfg.step_cap {
                    eng.step();
                    if exit.contains(rc.eval(&eng.q, &mut g)) {
                        return Ok(Some(k as f64 * cfg.dt));
                    }
                    if k % 4096 == 0 {
                        eng.check(1e6)?;
                    }
                }
                Ok(None)
            }
            (Dynamics::OneD { sde, .. }, Initials::OneD(zs)) => {
                let mut rng = Stream::new(cfg.seed, i as u64);
                let stepper = sde.stepper(cfg.dt);
                let mut z = zs[i];
                for k in 1..=cfg.step_cap {
                    z = stepper.advance(z, &mut rng);
                    if exit.contains(z) {
                        return Ok(Some(k as f64 * cfg.dt));
                    }
                }
                if !z.is_finite() {
                    return Err(Error::NonFinite("1D trajectory".into()));
                }
                Ok(None)
            }
            _ => Err(Error::InvalidParameter("initial states do not match the dynamics".into())),
        }
    };
    let n_init = match &initials {
        Initials::Full(q) => q.len(),
        Initials::OneD(z) => z.len(),
    };
    let out: Result<Vec<Option<f64>>> = (0..n_init).into_par_iter().map(run).collect();
    let out = out?;
    let times: Vec<f64> = out.iter().flatten().copied().collect();
    let censored = out.len() - times.len();
    if times.len() < 2 {
        return Err(Error::InsufficientSamples(format!("{} uncensored realizations", times.len())));
    }
    let (mean, half_width_95) = stats::mean_ci(&times);
    let kind = match dynamics {
        Dynamics::Full { .. } => DynamicsKind::Full,
        Dynamics::OneD { kind, .. } => *kind,
    };
    Ok(ResidenceTimeReport { kind, n: times.len(), mean, half_width_95, censored, exit: exit.describe(), dt: cfg.dt, seed: cfg.seed, times })
}
