//! Nearest-neighbour chains: strain under stress, thermodynamic-limit free
//! energy and force, and finite-N Monte Carlo references.

use crate::chain_mc::{self, Chain, ChainMcConfig, End, McEstimate};
use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;
use crate::potentials::PairPotential;
use crate::stats;
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq)]
pub struct ChainModelNN {
    pub w: PairPotential,
    pub beta: f64,
}

impl ChainModelNN {
    /// Checks beta > 0 and integrability of exp(-beta W).
    pub fn new(w: PairPotential, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return invalid(format!("beta must be positive, got {beta}"));
        }
        let m = ChainModelNN { w, beta };
        tilted_moments(&m.w, beta, 0.0, &Quadrature::default())?;
        Ok(m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Quadrature {
    /// Window found automatically, `n` Simpson nodes.
    Auto { n: usize },
    Fixed(QuadratureSpec),
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature::Auto { n: 4001 }
    }
}

/// Endpoint ratio required of the integrand relative to its maximum.
const END_RATIO: f64 = 1e-14;

/// Log-partition function, mean and variance of the density
/// proportional to exp(xi y - beta W(y)).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TiltedMoments {
    pub log_z: f64,
    pub mean: f64,
    pub variance: f64,
    pub window: QuadratureSpec,
}

fn simpson_moments(g: &dyn Fn(f64) -> f64, spec: QuadratureSpec) -> Result<(TiltedMoments, Vec<f64>)> {
    let grid = UniformGrid::new(spec.lo, spec.hi, spec.n)?;
    let w = grid.simpson_weights();
    let ys = grid.nodes();
    let gv: Vec<f64> = ys.iter().map(|&y| g(y)).collect();
    let gmax = gv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !gmax.is_finite() || gv.iter().any(|v| v.is_nan()) {
        return Err(Error::NonIntegrable("log-integrand has no finite maximum on the window".into()));
    }
    let e: Vec<f64> = gv.iter().map(|v| (v - gmax).exp()).collect();
    let z: f64 = (0..grid.n).map(|i| w[i] * e[i]).sum();
    let mean = (0..grid.n).map(|i| w[i] * e[i] * ys[i]).sum::<f64>() / z;
    let variance = (0..grid.n).map(|i| w[i] * e[i] * (ys[i] - mean).powi(2)).sum::<f64>() / z;
    Ok((TiltedMoments { log_z: gmax + z.ln(), mean, variance, window: spec }, e))
}

fn ends_ok(e: &[f64]) -> bool {
    e[0] < END_RATIO && e[e.len() - 1] < END_RATIO
}

/// Moments of exp(xi y - beta W(y)) by composite Simpson.
pub fn tilted_moments(w: &PairPotential, beta: f64, xi: f64, quad: &Quadrature) -> Result<TiltedMoments> {
    let g = |y: f64| xi * y - beta * w.value(y);
    match *quad {
        Quadrature::Fixed(spec) => {
            if spec.n < 3 || spec.n % 2 == 0 || !(spec.lo < spec.hi) {
                return invalid("quadrature needs lo < hi and an odd n >= 3");
            }
            let (m, e) = simpson_moments(&g, spec)?;
            if !ends_ok(&e) {
                return Err(Error::NonIntegrable(format!(
                    "integrand not negligible at the ends of [{}, {}]",
                    spec.lo, spec.hi
                )));
            }
            Ok(m)
        }
        Quadrature::Auto { n } => {
            let n = if n % 2 == 0 { n + 1 } else { n.max(3) };
            let c = w.argmin();
            let mut half = 6.0 / beta.sqrt();
            for _ in 0..60 {
                let spec = QuadratureSpec { lo: c - half, hi: c + half, n };
                let (_, e) = simpson_moments(&g, spec)?;
                if ends_ok(&e) {
                    // shrink to where the integrand matters, then redo at full resolution
                    let h = 2.0 * half / (n - 1) as f64;
                    let first = e.iter().position(|&v| v >= 0.1 * END_RATIO).unwrap_or(0);
                    let last = e.iter().rposition(|&v| v >= 0.1 * END_RATIO).unwrap_or(n - 1);
                    let lo = spec.lo + first.saturating_sub(1) as f64 * h;
                    let hi = spec.lo + (last + 1).min(n - 1) as f64 * h;
                    let tight = QuadratureSpec { lo, hi, n };
                    let (m, e2) = simpson_moments(&g, tight)?;
                    return if ends_ok(&e2) { Ok(m) } else { simpson_moments(&g, spec).map(|r| r.0) };
                }
                half *= 2.0;
            }
            Err(Error::NonIntegrable(format!("exp({xi} y - beta W) does not decay on any window")))
        }
    }
}

/// Macroscopic strain y*(f): mean bond length under applied stress f.
pub fn strain_for_stress_nn(m: &ChainModelNN, f: f64, quad: &Quadrature) -> Result<f64> {
    Ok(tilted_moments(&m.w, m.beta, m.beta * f, quad)?.mean)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeEnergyNN {
    pub f_inf: f64,
    pub f_inf_prime: f64,
    pub xi_star: f64,
}

/// Largest |xi| explored when bracketing the Legendre maximizer.
pub const XI_MAX: f64 = 1e4;

/// Thermodynamic-limit free energy F_inf(x) (up to its additive constant,
/// normalized so that the tilted log-partition is zero at xi = 0) and force.
pub fn free_energy_limit_nn(m: &ChainModelNN, x: f64, quad: &Quadrature) -> Result<FreeEnergyNN> {
    let mom = |xi: f64| tilted_moments(&m.w, m.beta, xi, quad);
    let l0 = mom(0.0)?.log_z;
    let xi_star = legendre_newton(
        |xi| mom(xi).map(|t| (t.mean, t.variance)),
        x,
        m.beta * m.w.second_derivative(x) * (x - m.w.argmin()),
        XI_MAX,
    )?;
    let lz = mom(xi_star)?.log_z - l0;
    Ok(FreeEnergyNN { f_inf: (xi_star * x - lz) / m.beta, f_inf_prime: xi_star / m.beta, xi_star })
}

/// Solves mean(xi) = x for an increasing mean(xi) with slope variance(xi),
/// by Newton steps kept inside a bisection bracket.
pub(crate) fn legendre_newton(
    moments: impl Fn(f64) -> Result<(f64, f64)>,
    x: f64,
    xi0: f64,
    xi_max: f64,
) -> Result<f64> {
    let mut xi = if xi0.is_finite() { xi0.clamp(-xi_max, xi_max) } else { 0.0 };
    let (mut mean, mut var) = moments(xi)?;
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    if mean < x {
        lo = xi;
    } else {
        hi = xi;
    }
    // expand until the root is bracketed
    let mut step = 1.0f64.max(xi.abs());
    while !(lo.is_finite() && hi.is_finite()) {
        let t = if lo.is_finite() { lo + step } else { hi - step };
        if t.abs() > xi_max {
            return Err(Error::OutOfRange(format!("no Legendre maximizer for x = {x} with |xi| <= {xi_max}")));
        }
        let (mt, _) = moments(t)?;
        if mt < x {
            lo = t;
        } else {
            hi = t;
        }
        step *= 2.0;
    }
    if !(lo <= xi && xi <= hi) {
        xi = 0.5 * (lo + hi);
        (mean, var) = moments(xi)?;
    }
    for _ in 0..500 {
        let mut next = xi + (x - mean) / var;
        if !(next > lo && next < hi) || !next.is_finite() {
            next = 0.5 * (lo + hi);
        }
        let dx = (next - xi).abs();
        xi = next;
        (mean, var) = moments(xi)?;
        if mean < x {
            lo = xi;
        } else {
            hi = xi;
        }
        if dx < 1e-10 || hi - lo < 1e-12 {
            return Ok(xi);
        }
    }
    Err(Error::NoConvergence(format!("Legendre maximizer for x = {x}")))
}

/// Finite-N mean force F'_N(x) of a chain with ends at 0 and N x.
pub fn reference_force_mc_nn(m: &ChainModelNN, x: f64, n: usize, cfg: &ChainMcConfig) -> Result<McEstimate> {
    chain_mc::fixed_end_force(&m.w, None, m.beta, x, n, cfg)
}

/// Chain with a free end pulled by force f: per-bond mean force W'(y_j)
/// with 95% half widths, j = 1..N.
pub fn reference_bond_forces_nn_neumann(m: &ChainModelNN, f: f64, n: usize, cfg: &ChainMcConfig) -> Result<Vec<(f64, f64)>> {
    cfg.traj.validate()?;
    if n < 2 || cfg.realizations < 2 {
        return invalid("need N >= 2 and at least 2 realizations");
    }
    let chain = Chain { w1: &m.w, w2: None, beta: m.beta, n, end: End::Force(f) };
    let y0 = crate::potentials::golden_min(|y| m.w.value(y) - f * y, m.w.argmin() - 10.0, m.w.argmin() + 10.0);
    let per: Result<Vec<Vec<f64>>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let mut q: Vec<f64> = (0..=n).map(|i| i as f64 * y0).collect();
            let mut acc = vec![0.0; n];
            let mut c = 0usize;
            chain.run(&mut q, &cfg.traj, cfg.sampler, r as u64, |q| {
                for j in 1..=n {
                    acc[j - 1] += chain.cut_force(q, j);
                }
                c += 1;
            })?;
            Ok(acc.into_iter().map(|s| s / c as f64).collect())
        })
        .collect();
    let per = per?;
    Ok((0..n)
        .map(|j| {
            let col: Vec<f64> = per.iter().map(|r| r[j]).collect();
            stats::mean_ci(&col)
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(a: f64, beta: f64) -> ChainModelNN {
        ChainModelNN::new(PairPotential::Quadratic { a }, beta).unwrap()
    }

    #[test]
    fn gaussian_strain() {
        let q = Quadrature::default();
        assert!((strain_for_stress_nn(&gauss(1.0, 1.0), 0.0, &q).unwrap() - 1.0).abs() < 1e-8);
        assert!((strain_for_stress_nn(&gauss(1.0, 2.0), 0.5, &q).unwrap() - 1.5).abs() < 1e-8);
    }

    #[test]
    fn gaussian_free_energy() {
        let q = Quadrature::default();
        for beta in [0.5, 1.0, 3.0] {
            let m = gauss(1.0, beta);
            for x in [0.2, 1.0, 1.4, 2.5] {
                let r = free_energy_limit_nn(&m, x, &q).unwrap();
                assert!((r.f_inf - 0.5 * (x - 1.0) * (x - 1.0)).abs() < 1e-8, "{beta} {x} {r:?}");
                assert!((r.f_inf_prime - (x - 1.0)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn zero_force_at_rest_length() {
        let q = Quadrature::default();
        let m = ChainModelNN::new(PairPotential::QuarticW1, 1.0).unwrap();
        let y0 = strain_for_stress_nn(&m, 0.0, &q).unwrap();
        assert!(free_energy_limit_nn(&m, y0, &q).unwrap().f_inf_prime.abs() < 1e-9);
    }

    #[test]
    fn matches_fine_trapezoid_oracle() {
        let m = ChainModelNN::new(PairPotential::QuarticW1, 1.0).unwrap();
        let y = strain_for_stress_nn(&m, 0.0, &Quadrature::default()).unwrap();
        // trapezoid on [-6, 8] with 10x the default node count
        let n = 40_001;
        let h = 14.0 / (n - 1) as f64;
        let (mut z, mut s) = (0.0, 0.0);
        for i in 0..n {
            let yi = -6.0 + i as f64 * h;
            let wi = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            let e = (-PairPotential::QuarticW1.value(yi)).exp();
            z += wi * e;
            s += wi * e * yi;
        }
        assert!((y - s / z).abs() < 1e-8, "{y} vs {}", s / z);
    }

    #[test]
    fn strain_is_increasing_and_dual() {
        let q = Quadrature::default();
        let m = ChainModelNN::new(PairPotential::QuarticW1, 1.0).unwrap();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let f = -3.0 + 0.3 * k as f64;
            let y = strain_for_stress_nn(&m, f, &q).unwrap();
            assert!(y > prev);
            prev = y;
        }
        for k in 0..=8 {
            let x = 0.2 + 0.2 * k as f64;
            let r = free_energy_limit_nn(&m, x, &q).unwrap();
            assert!((strain_for_stress_nn(&m, r.f_inf_prime, &q).unwrap() - x).abs() < 1e-5);
        }
    }

    #[test]
    fn fixed_window_is_checked() {
        let m = ChainModelNN::new(PairPotential::QuarticW1, 1.0).unwrap();
        let narrow = Quadrature::Fixed(QuadratureSpec { lo: -0.5, hi: 1.0, n: 101 });
        assert!(matches!(strain_for_stress_nn(&m, 0.0, &narrow), Err(Error::NonIntegrable(_))));
        let even = Quadrature::Fixed(QuadratureSpec { lo: -6.0, hi: 8.0, n: 100 });
        assert!(strain_for_stress_nn(&m, 0.0, &even).is_err());
    }

    #[test]
    fn non_integrable_potential_is_rejected() {
        assert!(matches!(
            ChainModelNN::new(PairPotential::Polynomial(vec![0.0, 1.0]), 1.0),
            Err(Error::NonIntegrable(_))
        ));
        assert!(ChainModelNN::new(PairPotential::QuarticW1, -1.0).is_err());
    }

    #[test]
    fn gaussian_chain_force_is_exact() {
        let m = gauss(1.0, 1.0);
        let mut cfg = ChainMcConfig::default();
        cfg.traj.steps = 20_000;
        cfg.traj.burn_in = 1000;
        cfg.realizations = 4;
        for est in [crate::chain_mc::ForceEstimator::CutAverage, crate::chain_mc::ForceEstimator::EndCut] {
            cfg.estimator = est;
            let r = reference_force_mc_nn(&m, 1.4, 10, &cfg).unwrap();
            assert!((r.estimate - 0.4).abs() <= r.half_width_95 + 1e-12, "{est:?} {r:?}");
        }
    }

    #[test]
    fn overflow_guard_trips_for_large_dt() {
        let m = ChainModelNN::new(PairPotential::QuarticW1, 1.0).unwrap();
        let mut cfg = ChainMcConfig::default();
        cfg.sampler = crate::sde::Sampler::EulerMaruyama;
        cfg.traj.dt = 2.0;
        cfg.traj.steps = 2000;
        cfg.traj.burn_in = 0;
        cfg.realizations = 2;
        assert!(matches!(reference_force_mc_nn(&m, 1.4, 5, &cfg), Err(Error::Overflow(_))));
        // the Metropolis correction rejects the runaway proposals instead
        cfg.sampler = crate::sde::Sampler::Mala;
        assert!(reference_force_mc_nn(&m, 1.4, 5, &cfg).is_ok());
    }
}
