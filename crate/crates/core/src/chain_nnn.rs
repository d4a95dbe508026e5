//! Next-to-nearest-neighbour chains: strain under stress, thermodynamic-limit
//! force by Legendre transform of the spectral table, asymptotic variance,
//! finite-N Monte Carlo and the zero-temperature limit.

use crate::chain_mc::{self, ChainMcConfig, McEstimate};
use crate::error::{invalid, Error, Result};
use crate::grid::{Hermite, UniformGrid};
use crate::potentials::PairPotential;
use crate::rng::Stream;
use crate::stats;
use crate::transfer_operator::{auto_y_grid, build_kernel, leading_eigenpair, Eigenpair, SpectralTable, YGrid};

#[derive(Clone, Debug, PartialEq)]
pub struct ChainModelNNN {
    pub w1: PairPotential,
    pub w2: PairPotential,
    pub beta: f64,
}

impl ChainModelNNN {
    pub fn new(w1: PairPotential, w2: PairPotential, beta: f64) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return invalid(format!("beta must be positive, got {beta}"));
        }
        auto_y_grid(&w1, beta, &[0.0], 101)?;
        Ok(ChainModelNNN { w1, w2, beta })
    }

    fn grid_for(&self, xi: f64, y: YGrid) -> Result<UniformGrid> {
        match y {
            YGrid::Fixed(g) => Ok(g),
            YGrid::Auto { n } => auto_y_grid(&self.w1, self.beta, &[xi], n),
        }
    }

    /// Leading eigenpair of the kernel tilted by xi, with its y grid.
    pub fn eigenpair(&self, xi: f64, y: YGrid) -> Result<(UniformGrid, Eigenpair)> {
        let g = self.grid_for(xi, y)?;
        let e = leading_eigenpair(&build_kernel(&self.w1, &self.w2, self.beta, xi, g)?)?;
        Ok((g, e))
    }
}

fn psi_mean(g: &UniformGrid, psi: &[f64]) -> f64 {
    let w = g.trapezoid_weights();
    (0..g.n).map(|i| w[i] * g.node(i) * psi[i] * psi[i]).sum()
}

/// Macroscopic strain y*(f) = sum_i w_i y_i psi_f(y_i)^2.
pub fn strain_for_stress_nnn(m: &ChainModelNNN, f: f64, y: YGrid) -> Result<f64> {
    let (g, e) = m.eigenpair(m.beta * f, y)?;
    Ok(psi_mean(&g, &e.psi))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FreeEnergyNNN {
    pub f_inf_prime: f64,
    pub xi_star: f64,
}

/// Maximizes xi x - ln Lambda(xi) over the table, using the cubic Hermite
/// interpolant of ln lambda built from its values and slopes at the nodes.
pub fn free_energy_limit_nnn(m: &ChainModelNNN, x: f64, table: &SpectralTable) -> Result<FreeEnergyNNN> {
    let n = table.xi.n;
    let (lo_m, hi_m) = (table.mean[0], table.mean[n - 1]);
    if !(x > lo_m && x < hi_m) {
        return Err(Error::OutOfRange(format!("strain {x} outside the table range [{lo_m}, {hi_m}]")));
    }
    let s = Hermite { grid: table.xi, y: table.log_lambda.clone(), dy: table.mean.clone() };
    let (mut lo, mut hi) = (table.xi.lo, table.xi.hi());
    // start from the bracketing nodes
    let k = table.mean.partition_point(|&v| v < x);
    let mut xi = table.xi.node(k.saturating_sub(1));
    for _ in 0..200 {
        let d = s.deriv(xi);
        if d < x {
            lo = lo.max(xi);
        } else {
            hi = hi.min(xi);
        }
        let d2 = s.deriv2(xi);
        let mut next = xi + (x - d) / d2;
        if !(d2 > 0.0) || !(next > lo && next < hi) {
            next = 0.5 * (lo + hi);
        }
        let step = (next - xi).abs();
        xi = next;
        if step < 1e-13 || hi - lo < 1e-13 {
            return Ok(FreeEnergyNNN { f_inf_prime: xi / m.beta, xi_star: xi });
        }
    }
    Err(Error::NoConvergence(format!("Legendre maximizer for x = {x}")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceConfig {
    pub seed: u64,
    pub y: YGrid,
    /// Steps per batch.
    pub batch_len: usize,
}

impl Default for VarianceConfig {
    fn default() -> Self {
        VarianceConfig { seed: 0, y: YGrid::Auto { n: 400 }, batch_len: 100 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VarianceEstimate {
    pub sigma2: f64,
    pub half_width_95: f64,
    /// Estimates from the first and second half of the chain.
    pub halves: (f64, f64),
}

/// Normalized Markov chain of the tilted kernel on the y grid:
/// P_ij = M_ij v_j / (lambda v_i), stationary law v_i^2.
pub struct GridMarkovChain {
    pub nodes: Vec<f64>,
    cdf: Vec<f64>,
    stationary_cdf: Vec<f64>,
    n: usize,
}

impl GridMarkovChain {
    pub fn new(m: &ChainModelNNN, f: f64, y: YGrid) -> Result<Self> {
        let g = m.grid_for(m.beta * f, y)?;
        let k = build_kernel(&m.w1, &m.w2, m.beta, m.beta * f, g)?;
        let e = leading_eigenpair(&k)?;
        let n = g.n;
        let mut cdf = vec![0.0; n * n];
        for i in 0..n {
            let mut acc = 0.0;
            for j in 0..n {
                acc += k.get(i, j) * e.v[j];
                cdf[i * n + j] = acc;
            }
            for j in 0..n {
                cdf[i * n + j] /= acc;
            }
        }
        let mut stationary_cdf = Vec::with_capacity(n);
        let mut acc = 0.0;
        for v in &e.v {
            acc += v * v;
            stationary_cdf.push(acc);
        }
        stationary_cdf.iter_mut().for_each(|c| *c /= acc);
        Ok(GridMarkovChain { nodes: g.nodes(), cdf, stationary_cdf, n })
    }

    /// Stationary draw by inverse CDF on the cumulative weights.
    pub fn sample_stationary(&self, rng: &mut Stream) -> usize {
        let u = rng.uniform();
        self.stationary_cdf.partition_point(|&c| c <= u).min(self.n - 1)
    }

    pub fn step(&self, i: usize, rng: &mut Stream) -> usize {
        let row = &self.cdf[i * self.n..(i + 1) * self.n];
        let u = rng.uniform();
        row.partition_point(|&c| c <= u).min(self.n - 1)
    }

    /// Stationary mean and variance of y.
    pub fn stationary_moments(&self) -> (f64, f64) {
        let mut prev = 0.0;
        let (mut m, mut m2) = (0.0, 0.0);
        for i in 0..self.n {
            let p = self.stationary_cdf[i] - prev;
            prev = self.stationary_cdf[i];
            m += p * self.nodes[i];
            m2 += p * self.nodes[i] * self.nodes[i];
        }
        (m, m2 - m * m)
    }
}

/// sigma^2(f) = lim N Var(mean of y over N steps) by batch means on a single
/// stationary run of `chain_samples` steps.
pub fn asymptotic_variance_nnn(m: &ChainModelNNN, f: f64, chain_samples: usize, cfg: &VarianceConfig) -> Result<VarianceEstimate> {
    let b = cfg.batch_len.max(1);
    let nb = (chain_samples / b) & !1;
    if nb < 20 {
        return Err(Error::InsufficientSamples(format!("{chain_samples} samples give only {nb} batches of {b}")));
    }
    let chain = GridMarkovChain::new(m, f, cfg.y)?;
    let mut rng = Stream::new(cfg.seed, 0);
    let mut i = chain.sample_stationary(&mut rng);
    let mut means = Vec::with_capacity(nb);
    for _ in 0..nb {
        let mut s = 0.0;
        for _ in 0..b {
            s += chain.nodes[i];
            i = chain.step(i, &mut rng);
        }
        means.push(s / b as f64);
    }
    let est = |x: &[f64]| b as f64 * stats::variance(x);
    let sigma2 = est(&means);
    let halves = (est(&means[..nb / 2]), est(&means[nb / 2..]));
    if (halves.0 - halves.1).abs() > 0.2 * sigma2 {
        return Err(Error::InsufficientSamples(format!(
            "batch variance unstable between halves: {} vs {}",
            halves.0, halves.1
        )));
    }
    let half_width_95 = stats::Z95 * sigma2 * (2.0 / (nb - 1) as f64).sqrt();
    Ok(VarianceEstimate { sigma2, half_width_95, halves })
}

/// Finite-N mean force F'_N(x) with ends held at 0 and N x.
pub fn reference_force_mc_nnn(m: &ChainModelNNN, x: f64, n: usize, cfg: &ChainMcConfig) -> Result<McEstimate> {
    chain_mc::fixed_end_force(&m.w1, Some(&m.w2), m.beta, x, n, cfg)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ZeroTResult {
    /// W1(x) + W2(2x)
    pub phi: f64,
    pub phi_prime: f64,
    /// (1/N) min E_0 and the minimizing positions q_0..q_N, if N was given.
    pub j_n: Option<(f64, Vec<f64>)>,
    /// W1 or phi fails to be strictly convex at x.
    pub convexity_warning: bool,
}

/// Energy of a chain with positions q (both NN and NNN terms) and its gradient.
fn chain_energy(m: &ChainModelNNN, q: &[f64], g: &mut [f64]) -> f64 {
    let n = q.len() - 1;
    g.iter_mut().for_each(|v| *v = 0.0);
    let mut e = 0.0;
    for i in 1..=n {
        let d = q[i] - q[i - 1];
        e += m.w1.value(d);
        let f = m.w1.derivative(d);
        g[i] += f;
        g[i - 1] -= f;
    }
    for i in 1..n {
        let d = q[i + 1] - q[i - 1];
        e += m.w2.value(d);
        let f = m.w2.derivative(d);
        g[i + 1] += f;
        g[i - 1] -= f;
    }
    e
}

pub fn zero_temperature(m: &ChainModelNNN, x: f64, n: Option<usize>) -> Result<ZeroTResult> {
    let phi = m.w1.value(x) + m.w2.value(2.0 * x);
    let phi_prime = m.w1.derivative(x) + 2.0 * m.w2.derivative(2.0 * x);
    let convexity_warning = !(m.w1.second_derivative(x) > 0.0 && m.w1.second_derivative(x) + 4.0 * m.w2.second_derivative(2.0 * x) > 0.0);
    let j_n = match n {
        None => None,
        Some(n) if n < 2 => return invalid("N must be at least 2"),
        Some(n) => Some(minimize_chain(m, x, n)?),
    };
    Ok(ZeroTResult { phi, phi_prime, j_n, convexity_warning })
}

/// Steepest descent with backtracking over the interior positions, from the
/// affine configuration, until the gradient norm is below 1e-10.
fn minimize_chain(m: &ChainModelNNN, x: f64, n: usize) -> Result<(f64, Vec<f64>)> {
    let mut q: Vec<f64> = (0..=n).map(|i| i as f64 * x).collect();
    let mut g = vec![0.0; n + 1];
    let mut gt = vec![0.0; n + 1];
    let mut trial = q.clone();
    let mut e = chain_energy(m, &q, &mut g);
    let mut t = 0.1;
    for _ in 0..20_000_000u64 {
        let gn2: f64 = g[1..n].iter().map(|v| v * v).sum();
        if gn2.sqrt() < 1e-10 {
            return Ok((e / n as f64, q));
        }
        t *= 2.0;
        loop {
            for i in 1..n {
                trial[i] = q[i] - t * g[i];
            }
            let et = chain_energy(m, &trial, &mut gt);
            // once the Armijo decrease drops below rounding of the energy,
            // backtrack on the gradient norm instead
            let armijo = 0.5 * t * gn2;
            let ok = if armijo > 1e-13 * e.abs().max(1.0) {
                et <= e - armijo
            } else {
                gt[1..n].iter().map(|v| v * v).sum::<f64>() < gn2
            };
            if ok {
                e = et;
                std::mem::swap(&mut q, &mut trial);
                std::mem::swap(&mut g, &mut gt);
                break;
            }
            t *= 0.5;
            if t < 1e-20 {
                // no decrease possible at machine precision
                let gn = gn2.sqrt();
                return if gn < 1e-8 { Ok((e / n as f64, q)) } else { Err(Error::NoConvergence(format!("descent stalled at gradient norm {gn:.3e}"))) };
            }
        }
    }
    Err(Error::NoConvergence("descent iteration limit".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chain_nn::{self, ChainModelNN, Quadrature};
    use crate::transfer_operator::log_lambda_curve;

    fn quartic() -> ChainModelNNN {
        ChainModelNNN::new(PairPotential::QuarticW1, PairPotential::QuarticW2, 1.0).unwrap()
    }

    #[test]
    fn gaussian_reduction() {
        let m = ChainModelNNN::new(PairPotential::Quadratic { a: 1.0 }, PairPotential::zero(), 1.0).unwrap();
        let y = strain_for_stress_nnn(&m, 0.5, YGrid::Auto { n: 400 }).unwrap();
        assert!((y - 1.5).abs() < 1e-8);
    }

    #[test]
    fn strain_increases_with_stress() {
        let m = quartic();
        let mut prev = f64::NEG_INFINITY;
        for k in 0..=20 {
            let y = strain_for_stress_nnn(&m, -2.0 + 0.2 * k as f64, YGrid::Auto { n: 200 }).unwrap();
            assert!(y > prev);
            prev = y;
        }
    }

    #[test]
    fn strain_matches_fine_dense_oracle() {
        let m = quartic();
        let coarse = strain_for_stress_nnn(&m, 0.0, YGrid::Auto { n: 100 }).unwrap();
        let fine = strain_for_stress_nnn(&m, 0.0, YGrid::Auto { n: 1000 }).unwrap();
        assert!((coarse - fine).abs() < 1e-6, "{coarse} vs {fine}");
    }

    #[test]
    fn reduces_to_nn_legendre() {
        let w1 = PairPotential::QuarticW1;
        let m = ChainModelNNN::new(w1.clone(), PairPotential::zero(), 1.0).unwrap();
        let table = log_lambda_curve(&m.w1, &m.w2, 1.0, UniformGrid::new(-6.0, 12.0, 361).unwrap(), YGrid::Auto { n: 400 }).unwrap();
        let nn = ChainModelNN::new(w1, 1.0).unwrap();
        for x in [0.3, 0.8, 1.4, 1.8] {
            let a = free_energy_limit_nnn(&m, x, &table).unwrap().f_inf_prime;
            let b = chain_nn::free_energy_limit_nn(&nn, x, &Quadrature::default()).unwrap().f_inf_prime;
            assert!((a - b).abs() < 1e-6, "{x}: {a} vs {b}");
        }
    }

    #[test]
    fn legendre_outside_table_is_an_error() {
        let m = quartic();
        let table = log_lambda_curve(&m.w1, &m.w2, 1.0, UniformGrid::new(-1.0, 1.0, 41).unwrap(), YGrid::Auto { n: 200 }).unwrap();
        assert!(matches!(free_energy_limit_nnn(&m, 5.0, &table), Err(Error::OutOfRange(_))));
    }

    #[test]
    fn iid_variance_reduction() {
        let m = ChainModelNNN::new(PairPotential::QuarticW1, PairPotential::zero(), 1.0).unwrap();
        let f = 0.5;
        // the chain is i.i.d., so short batches are unbiased
        let cfg = VarianceConfig { batch_len: 20, ..Default::default() };
        let r = asymptotic_variance_nnn(&m, f, 1_000_000, &cfg).unwrap();
        let t = chain_nn::tilted_moments(&PairPotential::QuarticW1, 1.0, f, &Quadrature::default()).unwrap();
        assert!((r.sigma2 - t.variance).abs() < 0.02 * t.variance, "{} vs {}", r.sigma2, t.variance);
    }

    #[test]
    fn variance_is_positive() {
        let m = quartic();
        for f in [-1.0, 0.0, 1.0, 2.0] {
            let r = asymptotic_variance_nnn(&m, f, 200_000, &VarianceConfig::default()).unwrap();
            assert!(r.sigma2 > 0.0);
        }
    }

    #[test]
    fn zero_temperature_closed_forms() {
        let m = quartic();
        let z = zero_temperature(&m, 1.4, None).unwrap();
        assert!((z.phi_prime - 2.214).abs() < 1e-12);
        assert!((z.phi - (0.9928 + 0.060025)).abs() < 1e-12);
        assert!(!z.convexity_warning);

        let nn = ChainModelNNN::new(PairPotential::QuarticW1, PairPotential::zero(), 1.0).unwrap();
        for n in [2, 7, 50] {
            let z = zero_temperature(&nn, 1.4, Some(n)).unwrap();
            assert!((z.j_n.unwrap().0 - PairPotential::QuarticW1.value(1.4)).abs() < 1e-12);
        }
    }

    #[test]
    fn minimizer_respects_upper_bound() {
        let m = quartic();
        for x in [0.8, 1.4] {
            for n in [5, 20] {
                let z = zero_temperature(&m, x, Some(n)).unwrap();
                let j = z.j_n.unwrap().0;
                let ub = m.w1.value(x) + (n - 1) as f64 / n as f64 * m.w2.value(2.0 * x);
                assert!(j <= ub + 1e-12);
            }
        }
    }
}
