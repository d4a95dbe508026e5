//! Overdamped Langevin sampling of 1D chains with nearest and (optionally)
//! next-nearest neighbour interactions, in unscaled positions q_i = u_i / h.

use crate::error::{Error, Result};
use crate::potentials::PairPotential;
use crate::rng::Stream;
use crate::sde::{Sampler, TrajectoryConfig};
use crate::stats;
use rayon::prelude::*;

/// Which observable estimates the mean force.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ForceEstimator {
    /// Force across the last cut: W1'(y_N) (+ W2'(q_N - q_{N-2})).
    EndCut,
    /// Average over all N cuts of the force transmitted across the cut. Every
    /// cut has the same expectation; the average has a smaller variance.
    CutAverage,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChainMcConfig {
    pub traj: TrajectoryConfig,
    /// Independent realizations; each contributes one batch mean.
    pub realizations: usize,
    pub estimator: ForceEstimator,
    pub sampler: Sampler,
}

impl Default for ChainMcConfig {
    fn default() -> Self {
        ChainMcConfig {
            traj: TrajectoryConfig { dt: 1e-3, steps: 200_000, seed: 0, burn_in: 20_000, thinning: 10, overflow_guard: 1e6 },
            realizations: 40,
            estimator: ForceEstimator::CutAverage,
            sampler: Sampler::Mala,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct McEstimate {
    pub estimate: f64,
    pub half_width_95: f64,
    /// Per-realization means.
    pub batches: Vec<f64>,
}

#[derive(Clone, Copy, Debug)]
pub(crate) enum End {
    /// q_N held at its initial value.
    Fixed,
    /// q_N free, pulled by a constant force f.
    Force(f64),
}

pub(crate) struct Chain<'a> {
    pub w1: &'a PairPotential,
    pub w2: Option<&'a PairPotential>,
    pub beta: f64,
    pub n: usize,
    pub end: End,
}

impl<'a> Chain<'a> {
    fn free_range(&self) -> std::ops::Range<usize> {
        match self.end {
            End::Fixed => 1..self.n,
            End::Force(_) => 1..self.n + 1,
        }
    }

    /// Gradient of the energy with respect to q (entries 0 and, for fixed
    /// ends, N are computed but never used). Returns false if a hard wall is hit.
    fn gradient(&self, q: &[f64], g: &mut [f64]) -> bool {
        g.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=self.n {
            let d = self.w1.derivative(q[i] - q[i - 1]);
            if d.is_nan() {
                return false;
            }
            g[i] += d;
            g[i - 1] -= d;
        }
        if let Some(w2) = self.w2 {
            for i in 1..self.n {
                let d = w2.derivative(q[i + 1] - q[i - 1]);
                if d.is_nan() {
                    return false;
                }
                g[i + 1] += d;
                g[i - 1] -= d;
            }
        }
        if let End::Force(f) = self.end {
            g[self.n] -= f;
        }
        true
    }

    /// Energy including the end load; None inside a hard wall.
    fn energy(&self, q: &[f64]) -> Option<f64> {
        let mut e = 0.0;
        for i in 1..=self.n {
            e += self.w1.eval(q[i] - q[i - 1]).finite()?;
        }
        if let Some(w2) = self.w2 {
            for i in 1..self.n {
                e += w2.eval(q[i + 1] - q[i - 1]).finite()?;
            }
        }
        if let End::Force(f) = self.end {
            e -= f * q[self.n];
        }
        Some(e)
    }

    fn admissible(&self, q: &[f64]) -> bool {
        (1..=self.n).all(|i| !self.w1.eval(q[i] - q[i - 1]).is_wall())
            && self.w2.map_or(true, |w2| (1..self.n).all(|i| !w2.eval(q[i + 1] - q[i - 1]).is_wall()))
    }

    /// Mean force through the chain for the chosen estimator.
    pub fn force(&self, q: &[f64], est: ForceEstimator) -> f64 {
        let n = self.n;
        match est {
            ForceEstimator::EndCut => {
                let mut f = self.w1.derivative(q[n] - q[n - 1]);
                if let Some(w2) = self.w2 {
                    f += w2.derivative(q[n] - q[n - 2]);
                }
                f
            }
            ForceEstimator::CutAverage => {
                let mut s: f64 = (1..=n).map(|i| self.w1.derivative(q[i] - q[i - 1])).sum();
                if let Some(w2) = self.w2 {
                    s += 2.0 * (1..n).map(|i| w2.derivative(q[i + 1] - q[i - 1])).sum::<f64>();
                }
                s / n as f64
            }
        }
    }

    /// Force transmitted across cut j (between atoms j-1 and j), j = 1..=N.
    pub fn cut_force(&self, q: &[f64], j: usize) -> f64 {
        let mut f = self.w1.derivative(q[j] - q[j - 1]);
        if let Some(w2) = self.w2 {
            if j >= 2 {
                f += w2.derivative(q[j] - q[j - 2]);
            }
            if j + 1 <= self.n {
                f += w2.derivative(q[j + 1] - q[j - 1]);
            }
        }
        f
    }

    /// Runs one realization, calling `observe` on every thinned production state.
    pub fn run(&self, q: &mut [f64], cfg: &TrajectoryConfig, sampler: Sampler, stream: u64, mut observe: impl FnMut(&[f64])) -> Result<()> {
        let mut rng = Stream::new(cfg.seed, stream);
        let mut g = vec![0.0; q.len()];
        let mut trial = q.to_vec();
        let amp = (2.0 * cfg.dt / self.beta).sqrt();
        let range = self.free_range();
        if !self.admissible(q) || !self.gradient(q, &mut g) {
            return Err(Error::InvalidParameter("initial chain configuration is not admissible".into()));
        }
        let walls = self.w1.has_wall() || self.w2.map_or(false, |w| w.has_wall());
        let total = cfg.burn_in + cfg.steps;
        let mut energy = self.energy(q).unwrap_or(f64::INFINITY);
        let mut g_trial = vec![0.0; q.len()];
        let c = self.beta / (4.0 * cfg.dt);
        for step in 0..total {
            if sampler == Sampler::Mala {
                trial.copy_from_slice(q);
                for i in range.clone() {
                    trial[i] = q[i] - cfg.dt * g[i] + amp * rng.normal();
                }
                if let Some(e) = self.energy(&trial) {
                    self.gradient(&trial, &mut g_trial);
                    let (mut fwd, mut bwd) = (0.0, 0.0);
                    for i in range.clone() {
                        let a = trial[i] - q[i] + cfg.dt * g[i];
                        let b = q[i] - trial[i] + cfg.dt * g_trial[i];
                        fwd += a * a;
                        bwd += b * b;
                    }
                    let log_a = -self.beta * (e - energy) - c * (bwd - fwd);
                    if log_a >= 0.0 || rng.uniform() < log_a.exp() {
                        q.copy_from_slice(&trial);
                        std::mem::swap(&mut g, &mut g_trial);
                        energy = e;
                    }
                }
            } else if walls {
                trial.copy_from_slice(q);
                for i in range.clone() {
                    trial[i] = q[i] - cfg.dt * g[i] + amp * rng.normal();
                }
                // moves into a hard wall are rejected
                if self.admissible(&trial) {
                    q.copy_from_slice(&trial);
                    self.gradient(q, &mut g);
                }
            } else {
                for i in range.clone() {
                    q[i] += amp * rng.normal() - cfg.dt * g[i];
                }
                self.gradient(q, &mut g);
            }
            if step % 1024 == 0 && q.iter().any(|v| !v.is_finite() || v.abs() > cfg.overflow_guard) {
                return Err(Error::Overflow(format!("chain coordinate exceeded guard at step {step}; reduce dt")));
            }
            if step >= cfg.burn_in && (step - cfg.burn_in) % cfg.thinning == 0 {
                observe(q);
            }
        }
        if q.iter().any(|v| !v.is_finite() || v.abs() > cfg.overflow_guard) {
            return Err(Error::Overflow("chain coordinate exceeded guard; reduce dt".into()));
        }
        Ok(())
    }
}

/// Mean force of a chain with both ends fixed, q_0 = 0 and q_N = N x.
pub(crate) fn fixed_end_force(
    w1: &PairPotential,
    w2: Option<&PairPotential>,
    beta: f64,
    x: f64,
    n: usize,
    cfg: &ChainMcConfig,
) -> Result<McEstimate> {
    cfg.traj.validate()?;
    if n < 2 || (w2.is_some() && n < 3) {
        return Err(Error::InvalidParameter(format!("chain length N = {n} too small")));
    }
    if cfg.realizations < 2 {
        return Err(Error::InvalidParameter("need at least 2 realizations".into()));
    }
    let chain = Chain { w1, w2, beta, n, end: End::Fixed };
    let batches: Result<Vec<f64>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let mut q: Vec<f64> = (0..=n).map(|i| i as f64 * x).collect();
            let (mut s, mut c) = (0.0, 0usize);
            chain.run(&mut q, &cfg.traj, cfg.sampler, r as u64, |q| {
                s += chain.force(q, cfg.estimator);
                c += 1;
            })?;
            Ok(s / c as f64)
        })
        .collect();
    let batches = batches?;
    let (estimate, half_width_95) = stats::mean_ci(&batches);
    Ok(McEstimate { estimate, half_width_95, batches })
}
