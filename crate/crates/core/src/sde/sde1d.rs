use crate::error::{invalid, Result};
use crate::grid::GridFunction;
use crate::rng::Stream;

/// Coefficient of a 1D SDE.
#[derive(Clone, Debug)]
pub enum Coef {
    Grid(GridFunction),
    Const(f64),
    /// a + b z
    Linear(f64, f64),
}

impl Coef {
    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Coef::Grid(g) => g.eval(z),
            Coef::Const(c) => *c,
            Coef::Linear(a, b) => a + b * z,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Domain {
    Line,
    /// Reflecting walls at lo and hi.
    Reflect { lo: f64, hi: f64 },
    /// Wraps into [lo, lo + period).
    Periodic { lo: f64, period: f64 },
}

/// dz = b(z) dt + sqrt(2/beta) sigma(z) dW
#[derive(Clone, Debug)]
pub struct Sde1d {
    pub drift: Coef,
    pub sigma: Coef,
    pub beta: f64,
    pub domain: Domain,
}

impl Sde1d {
    pub fn new(drift: Coef, sigma: Coef, beta: f64, domain: Domain) -> Result<Self> {
        if !(beta > 0.0) {
            return invalid("beta must be positive");
        }
        if let Coef::Grid(g) = &sigma {
            if g.values.iter().any(|&s| !(s > 0.0)) {
                return invalid("diffusion coefficient must be positive on its grid");
            }
        }
        if let Domain::Reflect { lo, hi } = domain {
            if !(lo < hi) {
                return invalid("reflecting domain needs lo < hi");
            }
        }
        Ok(Sde1d { drift, sigma, beta, domain })
    }

    #[inline]
    pub fn step(&self, z: f64, dt: f64, rng: &mut Stream) -> f64 {
        let amp = (2.0 * dt / self.beta).sqrt();
        let z = z + self.drift.eval(z) * dt + amp * self.sigma.eval(z) * rng.normal();
        self.fold(z)
    }

    /// Integrator with the step size fixed; drift and diffusion tabulated on
    /// the same grid are interpolated together.
    pub fn stepper(&self, dt: f64) -> Stepper<'_> {
        let fused = match (&self.drift, &self.sigma) {
            (Coef::Grid(b), Coef::Grid(s)) if b.grid == s.grid && b.periodic == s.periodic => Some(Fused {
                lo: b.grid.lo,
                inv: 1.0 / b.grid.step,
                periodic: b.periodic,
                bs: b.values.iter().zip(&s.values).map(|(&x, &y)| [x, y]).collect(),
            }),
            _ => None,
        };
        Stepper { sde: self, dt, amp: (2.0 * dt / self.beta).sqrt(), fused }
    }

    #[inline]
    fn fold(&self, mut z: f64) -> f64 {
        match self.domain {
            Domain::Line => {}
            Domain::Reflect { lo, hi } => {
                // a step can cross a wall at most once unless it exceeds the width
                loop {
                    if z < lo {
                        z = 2.0 * lo - z;
                    } else if z > hi {
                        z = 2.0 * hi - z;
                    } else {
                        break;
                    }
                }
            }
            Domain::Periodic { lo, period } => {
                z = lo + (z - lo).rem_euclid(period);
            }
        }
        z
    }
}

struct Fused {
    lo: f64,
    inv: f64,
    periodic: bool,
    bs: Vec<[f64; 2]>,
}

impl Fused {
    #[inline]
    fn eval(&self, z: f64) -> (f64, f64) {
        let n = self.bs.len();
        let mut t = (z - self.lo) * self.inv;
        if self.periodic {
            t = t.rem_euclid(n as f64);
            let i = (t.floor() as usize).min(n - 1);
            let f = t - i as f64;
            let j = if i + 1 == n { 0 } else { i + 1 };
            let (a, c) = (self.bs[i], self.bs[j]);
            return (a[0] + f * (c[0] - a[0]), a[1] + f * (c[1] - a[1]));
        }
        if t <= 0.0 {
            let a = self.bs[0];
            return (a[0], a[1]);
        }
        if t >= (n - 1) as f64 {
            let a = self.bs[n - 1];
            return (a[0], a[1]);
        }
        let i = t as usize;
        let f = t - i as f64;
        let (a, c) = (self.bs[i], self.bs[i + 1]);
        (a[0] + f * (c[0] - a[0]), a[1] + f * (c[1] - a[1]))
    }
}

pub struct Stepper<'a> {
    sde: &'a Sde1d,
    dt: f64,
    amp: f64,
    fused: Option<Fused>,
}

impl Stepper<'_> {
    #[inline]
    pub fn advance(&self, z: f64, rng: &mut Stream) -> f64 {
        let (b, s) = match &self.fused {
            Some(f) => f.eval(z),
            None => (self.sde.drift.eval(z), self.sde.sigma.eval(z)),
        };
        self.sde.fold(z + b * self.dt + self.amp * s * rng.normal())
    }
}
