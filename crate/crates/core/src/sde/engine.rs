use super::TrajectoryConfig;
use crate::error::{Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::potentials::{Butane, Potential, ReactionCoordinate, ThreeAtom};
use std::f64::consts::PI;
use crate::rng::Stream;

/// Extra potential U(xi(q)) added to the dynamics; enters the force as
/// U'(xi) grad xi.
#[derive(Clone, Debug)]
pub struct Bias {
    pub rc: ReactionCoordinate,
    /// U'(z) on a grid.
    pub derivative: GridFunction,
    /// U(z) on the same grid.
    pub value: GridFunction,
}

impl Bias {
    /// Bias from tabulated values; the derivative is taken by centered differences.
    pub fn from_values(rc: ReactionCoordinate, value: GridFunction) -> Self {
        Bias { rc, derivative: value.derivative(), value }
    }

    /// U = -V_torsion on 1024 periodic nodes: flattens the dihedral profile.
    pub fn butane_torsion(b: &Butane) -> Self {
        let n = 1024;
        let g = UniformGrid::with_step(-PI, 2.0 * PI / n as f64, n);
        let v = g.nodes().iter().map(|&p| -b.torsion(p).0).collect();
        Bias::from_values(ReactionCoordinate::Dihedral, GridFunction { grid: g, values: v, periodic: true })
    }

    /// U = -min(W3, W3(theta_saddle)) on [0, pi]: removes the angle barrier
    /// and leaves the wells untouched.
    pub fn three_atom_barrier(t: &ThreeAtom) -> Self {
        let cap = t.w3(t.theta_saddle).0;
        let g = UniformGrid::with_step(0.0, PI / 1024.0, 1025);
        let v = g.nodes().iter().map(|&th| -t.w3(th).0.min(cap)).collect();
        Bias::from_values(ReactionCoordinate::Angle, GridFunction { grid: g, values: v, periodic: false })
    }
}

/// Euler-Maruyama integrator of dX = -grad V dt + sqrt(2/beta) dW.
pub struct Overdamped<'a, P: Potential + ?Sized> {
    pub potential: &'a P,
    pub beta: f64,
    pub dt: f64,
    pub q: Vec<f64>,
    /// grad V at q (without any bias).
    pub grad: Vec<f64>,
    pub energy: f64,
    bias: Option<&'a Bias>,
    rc_grad: Vec<f64>,
    amp: f64,
    rng: Stream,
    prop: Vec<f64>,
    prop_grad: Vec<f64>,
}

impl<'a, P: Potential + ?Sized> Overdamped<'a, P> {
    pub fn new(potential: &'a P, beta: f64, dt: f64, q0: &[f64], seed: u64, stream: u64) -> Result<Self> {
        if q0.len() != potential.dof() {
            return Err(Error::InvalidParameter(format!("initial state has {} coordinates, expected {}", q0.len(), potential.dof())));
        }
        if !(beta > 0.0) || !(dt > 0.0) {
            return Err(Error::InvalidParameter("beta and dt must be positive".into()));
        }
        let mut grad = vec![0.0; q0.len()];
        let energy = potential.energy_grad(q0, &mut grad);
        Ok(Overdamped {
            potential,
            beta,
            dt,
            q: q0.to_vec(),
            grad,
            energy,
            bias: None,
            rc_grad: vec![0.0; q0.len()],
            amp: (2.0 * dt / beta).sqrt(),
            rng: Stream::new(seed, stream),
            prop: vec![0.0; q0.len()],
            prop_grad: vec![0.0; q0.len()],
        })
    }

    pub fn with_bias(mut self, bias: Option<&'a Bias>) -> Self {
        self.bias = bias;
        self
    }

    #[inline]
    pub fn step(&mut self) {
        if let Some(b) = self.bias {
            let z = b.rc.eval(&self.q, &mut self.rc_grad);
            let du = b.derivative.eval(z);
            for i in 0..self.q.len() {
                self.q[i] += self.amp * self.rng.normal() - self.dt * (self.grad[i] + du * self.rc_grad[i]);
            }
        } else {
            for i in 0..self.q.len() {
                self.q[i] += self.amp * self.rng.normal() - self.dt * self.grad[i];
            }
        }
        self.energy = self.potential.energy_grad(&self.q, &mut self.grad);
    }

    /// Bias energy at `q` and U'(xi) grad xi added to `g`.
    fn add_bias(&mut self, which_prop: bool) -> f64 {
        let Some(b) = self.bias else { return 0.0 };
        let (q, g) = if which_prop { (&self.prop, &mut self.prop_grad) } else { (&self.q, &mut self.grad) };
        let z = b.rc.eval(q, &mut self.rc_grad);
        let du = b.derivative.eval(z);
        for i in 0..g.len() {
            g[i] += du * self.rc_grad[i];
        }
        b.value.eval(z)
    }

    /// Metropolis-adjusted Langevin step targeting exp(-beta (V + U)).
    /// Returns whether the proposal was accepted.
    pub fn step_mala(&mut self) -> bool {
        let d = self.q.len();
        let ex = self.energy + self.add_bias(false);
        // self.grad now holds the total gradient at q
        for i in 0..d {
            self.prop[i] = self.q[i] - self.dt * self.grad[i] + self.amp * self.rng.normal();
        }
        let vy = self.potential.energy_grad(&self.prop, &mut self.prop_grad);
        let ey = vy + self.add_bias(true);
        let c = self.beta / (4.0 * self.dt);
        let (mut fwd, mut bwd) = (0.0, 0.0);
        for i in 0..d {
            let f = self.prop[i] - self.q[i] + self.dt * self.grad[i];
            let b = self.q[i] - self.prop[i] + self.dt * self.prop_grad[i];
            fwd += f * f;
            bwd += b * b;
        }
        let log_a = -self.beta * (ey - ex) - c * (bwd - fwd);
        let accept = log_a.is_finite() && (log_a >= 0.0 || self.rng.uniform() < log_a.exp());
        if accept {
            std::mem::swap(&mut self.q, &mut self.prop);
            std::mem::swap(&mut self.grad, &mut self.prop_grad);
            self.energy = vy;
        }
        if self.bias.is_some() {
            // restore grad V without the bias
            self.energy = self.potential.energy_grad(&self.q, &mut self.grad);
        }
        accept
    }

    pub fn check(&self, guard: f64) -> Result<()> {
        if !self.energy.is_finite() || self.q.iter().any(|v| !v.is_finite() || v.abs() > guard) {
            return Err(Error::Overflow("trajectory left the overflow guard; reduce dt".into()));
        }
        Ok(())
    }
}

/// Thinned states of an overdamped trajectory after burn-in.
pub struct Trajectory<'a, P: Potential + ?Sized> {
    engine: Overdamped<'a, P>,
    cfg: TrajectoryConfig,
    step: u64,
    failed: bool,
}

impl<'a, P: Potential + ?Sized> Iterator for Trajectory<'a, P> {
    type Item = Result<(u64, Vec<f64>)>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        let end = self.cfg.burn_in + self.cfg.steps;
        while self.step < end {
            self.engine.step();
            self.step += 1;
            if self.step % 1024 == 0 {
                if let Err(e) = self.engine.check(self.cfg.overflow_guard) {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
            if self.step > self.cfg.burn_in && (self.step - self.cfg.burn_in) % self.cfg.thinning == 0 {
                if let Err(e) = self.engine.check(self.cfg.overflow_guard) {
                    self.failed = true;
                    return Some(Err(e));
                }
                return Some(Ok((self.step, self.engine.q.clone())));
            }
        }
        None
    }
}

/// Stream of thinned states (step index, configuration); realization `stream`
/// of the master seed in `cfg`.
pub fn simulate_overdamped<'a, P: Potential + ?Sized>(
    system: &'a P,
    beta: f64,
    cfg: &TrajectoryConfig,
    q0: &[f64],
    stream: u64,
) -> Result<Trajectory<'a, P>> {
    cfg.validate()?;
    let engine = Overdamped::new(system, beta, cfg.dt, q0, cfg.seed, stream)?;
    Ok(Trajectory { engine, cfg: cfg.clone(), step: 0, failed: false })
}
