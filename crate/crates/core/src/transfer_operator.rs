//! Discretized transfer operator of the next-to-nearest-neighbour chain and
//! its leading eigenpair as a function of the tilt xi.

use crate::error::{invalid, Error, Result};
use crate::grid::UniformGrid;
use crate::potentials::PairPotential;
use rayon::prelude::*;

/// Ratio of the half kernel exp(xi y/2 - beta W1(y)/2) at the grid ends to
/// its maximum below which the grid is accepted.
pub const TAIL_RATIO: f64 = 1e-12;

/// Symmetric matrix M_ij = sqrt(w_i) sqrt(w_j) K(y_i, y_j), stored as
/// exp(log_scale) * entries.
#[derive(Clone, Debug)]
pub struct KernelMatrix {
    pub grid: UniformGrid,
    pub weights: Vec<f64>,
    pub entries: Vec<f64>,
    pub log_scale: f64,
}

impl KernelMatrix {
    pub fn n(&self) -> usize {
        self.grid.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.grid.n + j]
    }

    fn apply(&self, v: &[f64], out: &mut [f64]) {
        let n = self.grid.n;
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.entries[i * n..(i + 1) * n];
            *o = row.iter().zip(v).map(|(a, b)| a * b).sum();
        }
    }
}

fn log_half_kernel(w1: &PairPotential, beta: f64, xi: f64, y: f64) -> f64 {
    0.5 * xi * y - 0.5 * beta * w1.value(y)
}

/// Checks exp(xi y/2 - beta W1(y)/2) is negligible at the grid ends.
pub fn tail_test(w1: &PairPotential, beta: f64, xi: f64, grid: &UniformGrid) -> bool {
    let lv: Vec<f64> = grid.nodes().iter().map(|&y| log_half_kernel(w1, beta, xi, y)).collect();
    let max = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cut = TAIL_RATIO.ln();
    max.is_finite() && lv[0] - max < cut && lv[lv.len() - 1] - max < cut
}

/// Kernel exp(xi (t+y)/2 - beta W2(t+y) - beta W1(t)/2 - beta W1(y)/2) on a
/// trapezoid grid.
pub fn build_kernel(w1: &PairPotential, w2: &PairPotential, beta: f64, xi: f64, grid: UniformGrid) -> Result<KernelMatrix> {
    if !(beta > 0.0) {
        return invalid("beta must be positive");
    }
    if !tail_test(w1, beta, xi, &grid) {
        return Err(Error::NonIntegrable(format!(
            "half kernel not negligible at the ends of [{}, {}] for xi = {xi}",
            grid.lo,
            grid.hi()
        )));
    }
    let n = grid.n;
    let ys = grid.nodes();
    let weights = grid.trapezoid_weights();
    let h: Vec<f64> = ys.iter().map(|&y| log_half_kernel(w1, beta, xi, y)).collect();
    let mut log_entries = vec![0.0; n * n];
    let mut log_scale = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            let v = h[i] + h[j] - beta * w2.value(ys[i] + ys[j]) + 0.5 * (weights[i].ln() + weights[j].ln());
            log_entries[i * n + j] = v;
            log_scale = log_scale.max(v);
        }
    }
    let entries = log_entries.iter().map(|v| (v - log_scale).exp()).collect();
    Ok(KernelMatrix { grid, weights, entries, log_scale })
}

#[derive(Clone, Debug)]
pub struct Eigenpair {
    pub log_lambda: f64,
    /// Eigenvector of the symmetric matrix, unit Euclidean norm, positive.
    pub v: Vec<f64>,
    /// psi_i = v_i / sqrt(w_i), so sum w_i psi_i^2 = 1.
    pub psi: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

impl Eigenpair {
    pub fn lambda(&self) -> f64 {
        self.log_lambda.exp()
    }
}

pub const MAX_POWER_ITERATIONS: usize = 100_000;

/// Leading eigenpair by power iteration from the all-ones vector.
pub fn leading_eigenpair(k: &KernelMatrix) -> Result<Eigenpair> {
    leading_eigenpair_from(k, &vec![1.0; k.n()])
}

/// Power iteration from a given positive start vector. Stops once the
/// Rayleigh quotient changes by less than 1e-13 (relative) and the vector by
/// less than 1e-12 in max norm.
pub fn leading_eigenpair_from(k: &KernelMatrix, start: &[f64]) -> Result<Eigenpair> {
    let n = k.n();
    let mut v = start.to_vec();
    normalize(&mut v);
    let mut w = vec![0.0; n];
    let mut lam = 0.0;
    for it in 1..=MAX_POWER_ITERATIONS {
        k.apply(&v, &mut w);
        let new_lam: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
        if !(new_lam > 0.0) {
            return Err(Error::NonFinite("power iteration produced a non-positive Rayleigh quotient".into()));
        }
        normalize(&mut w);
        let dv = w.iter().zip(&v).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let dl = (new_lam - lam).abs() / new_lam;
        std::mem::swap(&mut v, &mut w);
        lam = new_lam;
        if dl < 1e-13 && dv < 1e-12 {
            return Ok(finish(k, v, lam, it));
        }
    }
    let ep = finish(k, v, lam, MAX_POWER_ITERATIONS);
    Err(Error::NoConvergence(format!("power iteration, final residual {:.3e}", ep.residual)))
}

fn normalize(v: &mut [f64]) {
    let s = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter_mut().for_each(|x| *x /= s);
}

fn finish(k: &KernelMatrix, mut v: Vec<f64>, lam: f64, iterations: usize) -> Eigenpair {
    if v.iter().sum::<f64>() < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let mut mv = vec![0.0; v.len()];
    k.apply(&v, &mut mv);
    let residual = mv.iter().zip(&v).map(|(a, b)| (a - lam * b).powi(2)).sum::<f64>().sqrt() / lam;
    let psi = v.iter().zip(&k.weights).map(|(a, w)| a / w.sqrt()).collect();
    Eigenpair { log_lambda: lam.ln() + k.log_scale, v, psi, iterations, residual }
}

/// y-grid choice for a spectral table.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum YGrid {
    Fixed(UniformGrid),
    /// Window widened until the tail test passes for every tilt, with n nodes.
    Auto { n: usize },
}

/// ln(lambda(xi)) on a xi grid, with the eigenfunctions at every node.
#[derive(Clone, Debug)]
pub struct SpectralTable {
    pub w1: PairPotential,
    pub w2: PairPotential,
    pub beta: f64,
    pub xi: UniformGrid,
    pub y: UniformGrid,
    /// ln(lambda_0 Lambda(xi)), the log leading eigenvalue at tilt xi.
    pub log_lambda: Vec<f64>,
    /// ln(lambda_0), the value at xi = 0.
    pub log_lambda0: f64,
    /// Tilted mean sum_i w_i y_i psi_i^2 at every node (the slope of log_lambda).
    pub mean: Vec<f64>,
    /// Eigenfunctions psi (weight-normalized) at every xi node.
    pub psi: Vec<Vec<f64>>,
}

impl SpectralTable {
    /// ln Lambda(xi) = ln lambda(xi) - ln lambda_0.
    pub fn log_big_lambda(&self) -> Vec<f64> {
        self.log_lambda.iter().map(|v| v - self.log_lambda0).collect()
    }

    pub fn psi_at(&self, i: usize) -> &[f64] {
        &self.psi[i]
    }
}

/// Smallest symmetric window around the minimum of W1 (doubling from a width
/// of 6/sqrt(beta) on each side) whose n-point grid passes the tail test at
/// every tilt in `xis`.
pub fn auto_y_grid(w1: &PairPotential, beta: f64, xis: &[f64], n: usize) -> Result<UniformGrid> {
    let c = w1.argmin();
    let mut half = 6.0 / beta.sqrt();
    for _ in 0..40 {
        let g = UniformGrid::new(c - half, c + half, n)?;
        if xis.iter().all(|&xi| tail_test(w1, beta, xi, &g)) {
            // trim to the region where the half kernel matters for some tilt
            let ys = g.nodes();
            let cut = (0.1 * TAIL_RATIO).ln();
            let mut lo = g.hi();
            let mut hi = g.lo;
            for &xi in xis {
                let lv: Vec<f64> = ys.iter().map(|&y| log_half_kernel(w1, beta, xi, y)).collect();
                let max = lv.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let first = lv.iter().position(|v| v - max >= cut).unwrap_or(0);
                let last = lv.iter().rposition(|v| v - max >= cut).unwrap_or(n - 1);
                lo = lo.min(ys[first.saturating_sub(1)]);
                hi = hi.max(ys[(last + 1).min(n - 1)]);
            }
            let t = UniformGrid::new(lo, hi, n)?;
            return Ok(if xis.iter().all(|&xi| tail_test(w1, beta, xi, &t)) { t } else { g });
        }
        half *= 2.0;
    }
    Err(Error::NonIntegrable("no y window passes the tail test".into()))
}

/// Tabulates ln lambda(xi) over a uniform xi grid; nodes are computed in
/// parallel; each node is solved from scratch, so results do not depend on scheduling.
pub fn log_lambda_curve(w1: &PairPotential, w2: &PairPotential, beta: f64, xi: UniformGrid, y: YGrid) -> Result<SpectralTable> {
    let xis = xi.nodes();
    let ygrid = match y {
        YGrid::Fixed(g) => g,
        YGrid::Auto { n } => {
            let mut probe = vec![xis[0], xis[xis.len() - 1], 0.0];
            probe.extend(xis.iter().step_by(8));
            auto_y_grid(w1, beta, &probe, n)?
        }
    };
    let solve = |x: f64| -> Result<Eigenpair> { leading_eigenpair(&build_kernel(w1, w2, beta, x, ygrid)?) };
    let pairs: Result<Vec<Eigenpair>> = xis.par_iter().map(|&x| solve(x)).collect();
    let pairs = pairs?;
    let log_lambda0 = match xis.iter().position(|x| x.abs() < 1e-12 * xi.step) {
        Some(i) => pairs[i].log_lambda,
        None => solve(0.0)?.log_lambda,
    };
    let ys = ygrid.nodes();
    let w = ygrid.trapezoid_weights();
    let mean = pairs
        .iter()
        .map(|p| (0..ygrid.n).map(|i| w[i] * ys[i] * p.psi[i] * p.psi[i]).sum())
        .collect();
    Ok(SpectralTable {
        w1: w1.clone(),
        w2: w2.clone(),
        beta,
        xi,
        y: ygrid,
        log_lambda: pairs.iter().map(|p| p.log_lambda).collect(),
        log_lambda0,
        mean,
        psi: pairs.into_iter().map(|p| p.psi).collect(),
    })
}

/// Min and max over the grid of r(y) = exp(-beta W1(y)/2) / psi_0(y), with
/// psi_0 the untilted eigenfunction. Diagnostic only.
pub fn boundedness_ratio(w1: &PairPotential, w2: &PairPotential, beta: f64, grid: UniformGrid) -> Result<(f64, f64)> {
    let e = leading_eigenpair(&build_kernel(w1, w2, beta, 0.0, grid)?)?;
    let r: Vec<f64> = grid.nodes().iter().zip(&e.psi).map(|(&y, p)| (-0.5 * beta * w1.value(y)).exp() / p).collect();
    Ok((r.iter().cloned().fold(f64::INFINITY, f64::min), r.iter().cloned().fold(0.0, f64::max)))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    /// Dense symmetric eigen-decomposition by cyclic Jacobi rotations;
    /// returns the largest eigenvalue and its eigenvector.
    pub fn jacobi_leading(a: &[f64], n: usize) -> (f64, Vec<f64>) {
        let mut a = a.to_vec();
        let mut v = vec![0.0; n * n];
        for i in 0..n {
            v[i * n + i] = 1.0;
        }
        for _sweep in 0..100 {
            let off: f64 = (0..n).flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j))).map(|(i, j)| a[i * n + j].powi(2)).sum();
            if off < 1e-30 {
                break;
            }
            for p in 0..n {
                for q in p + 1..n {
                    let apq = a[p * n + q];
                    if apq.abs() < 1e-300 {
                        continue;
                    }
                    let theta = (a[q * n + q] - a[p * n + p]) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    for k in 0..n {
                        let akp = a[k * n + p];
                        let akq = a[k * n + q];
                        a[k * n + p] = c * akp - s * akq;
                        a[k * n + q] = s * akp + c * akq;
                    }
                    for k in 0..n {
                        let apk = a[p * n + k];
                        let aqk = a[q * n + k];
                        a[p * n + k] = c * apk - s * aqk;
                        a[q * n + k] = s * apk + c * aqk;
                    }
                    for k in 0..n {
                        let vkp = v[k * n + p];
                        let vkq = v[k * n + q];
                        v[k * n + p] = c * vkp - s * vkq;
                        v[k * n + q] = s * vkp + c * vkq;
                    }
                }
            }
        }
        let imax = (0..n).max_by(|&i, &j| a[i * n + i].total_cmp(&a[j * n + j])).unwrap();
        let mut vec: Vec<f64> = (0..n).map(|k| v[k * n + imax]).collect();
        if vec.iter().sum::<f64>() < 0.0 {
            vec.iter_mut().for_each(|x| *x = -*x);
        }
        (a[imax * n + imax], vec)
    }

    fn quartic() -> (PairPotential, PairPotential) {
        (PairPotential::QuarticW1, PairPotential::QuarticW2)
    }

    #[test]
    fn two_by_two() {
        let k = KernelMatrix {
            grid: UniformGrid::with_step(0.0, 1.0, 2),
            weights: vec![1.0, 1.0],
            entries: vec![2.0, 0.0, 0.0, 1.0],
            log_scale: 0.0,
        };
        let e = leading_eigenpair(&k).unwrap();
        assert!((e.lambda() - 2.0).abs() < 1e-12);
        assert!((e.v[0] - 1.0).abs() < 1e-12 && e.v[1].abs() < 1e-12);
    }

    #[test]
    fn kernel_structure() {
        let (w1, w2) = quartic();
        let g = auto_y_grid(&w1, 1.0, &[0.0], 200).unwrap();
        let k = build_kernel(&w1, &w2, 1.0, 0.0, g).unwrap();
        for i in 0..200 {
            for j in 0..200 {
                assert!(k.get(i, j) >= 0.0);
                assert!((k.get(i, j) - k.get(j, i)).abs() <= 1e-14 * k.get(i, j).abs());
            }
        }
        let narrow = UniformGrid::new(0.0, 1.0, 50).unwrap();
        assert!(build_kernel(&w1, &w2, 1.0, 0.0, narrow).is_err());
    }

    #[test]
    fn rank_one_kernel() {
        let w1 = PairPotential::QuarticW1;
        let zero = PairPotential::zero();
        let xi = 0.7;
        let g = auto_y_grid(&w1, 1.0, &[xi], 300).unwrap();
        let k = build_kernel(&w1, &zero, 1.0, xi, g).unwrap();
        let e = leading_eigenpair(&k).unwrap();
        let ys = g.nodes();
        let w = g.trapezoid_weights();
        let lam: f64 = (0..g.n).map(|i| w[i] * (xi * ys[i] - w1.value(ys[i])).exp()).sum();
        assert!((e.log_lambda - lam.ln()).abs() < 1e-12);
        let s = (lam).sqrt();
        for i in 0..g.n {
            let psi = (0.5 * xi * ys[i] - 0.5 * w1.value(ys[i])).exp() / s;
            assert!((e.psi[i] - psi).abs() < 1e-10 * (1.0 + psi));
        }
    }

    #[test]
    fn power_iteration_matches_jacobi() {
        let (w1, w2) = quartic();
        let g = auto_y_grid(&w1, 1.0, &[1.0], 200).unwrap();
        let k = build_kernel(&w1, &w2, 1.0, 1.0, g).unwrap();
        let e = leading_eigenpair(&k).unwrap();
        let (lj, vj) = jacobi_leading(&k.entries, g.n);
        let lp = (e.log_lambda - k.log_scale).exp();
        assert!((lp - lj).abs() < 1e-10 * lj, "{lp} vs {lj}");
        for i in 0..g.n {
            assert!((e.v[i] - vj[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn coarse_and_fine_grids_agree() {
        let (w1, w2) = quartic();
        let fine = auto_y_grid(&w1, 1.0, &[0.0], 400).unwrap();
        let coarse = UniformGrid::new(fine.lo, fine.hi(), 50).unwrap();
        let a = leading_eigenpair(&build_kernel(&w1, &w2, 1.0, 0.0, fine).unwrap()).unwrap();
        let b = leading_eigenpair(&build_kernel(&w1, &w2, 1.0, 0.0, coarse).unwrap()).unwrap();
        assert!((a.log_lambda - b.log_lambda).abs() < 1e-6, "{} vs {}", a.log_lambda, b.log_lambda);
    }

    #[test]
    fn eigenfunction_normalization_and_slope() {
        let (w1, w2) = quartic();
        let t = log_lambda_curve(&w1, &w2, 1.0, UniformGrid::new(-2.0, 2.0, 81).unwrap(), YGrid::Auto { n: 300 }).unwrap();
        let w = t.y.trapezoid_weights();
        for psi in &t.psi {
            assert!(psi.iter().all(|&p| p > 0.0));
            let s: f64 = psi.iter().zip(&w).map(|(p, w)| w * p * p).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
        let i0 = 40;
        assert_eq!(t.log_lambda[i0], t.log_lambda0);
        for i in 1..80 {
            let d = (t.log_lambda[i + 1] - t.log_lambda[i - 1]) / (2.0 * t.xi.step);
            // centered difference error is O(h^2) times the third cumulant
            assert!((d - t.mean[i]).abs() < 1e-3, "{i}: {d} vs {}", t.mean[i]);
        }
        // finer xi step for the 1e-5 check
        let h = 1e-3;
        let grid = t.y;
        let lam = |x: f64| leading_eigenpair(&build_kernel(&w1, &w2, 1.0, x, grid).unwrap()).unwrap().log_lambda;
        let d = (lam(0.5 + h) - lam(0.5 - h)) / (2.0 * h);
        let e = leading_eigenpair(&build_kernel(&w1, &w2, 1.0, 0.5, grid).unwrap()).unwrap();
        let ys = grid.nodes();
        let m: f64 = (0..grid.n).map(|i| w[i] * ys[i] * e.psi[i] * e.psi[i]).sum();
        assert!((d - m).abs() < 1e-5);
    }

    #[test]
    fn gaussian_generating_function() {
        let a = 1.3;
        let t = log_lambda_curve(
            &PairPotential::Quadratic { a },
            &PairPotential::zero(),
            1.0,
            UniformGrid::new(-3.0, 3.0, 121).unwrap(),
            YGrid::Auto { n: 400 },
        )
        .unwrap();
        for (x, l) in t.xi.nodes().iter().zip(t.log_big_lambda()) {
            assert!((l - (a * x + 0.5 * x * x)).abs() < 1e-6);
        }
    }

    #[test]
    fn second_eigenvalue_is_smaller() {
        let (w1, w2) = quartic();
        let g = auto_y_grid(&w1, 1.0, &[0.0], 200).unwrap();
        let k = build_kernel(&w1, &w2, 1.0, 0.0, g).unwrap();
        let e = leading_eigenpair(&k).unwrap();
        // deflate and iterate again
        let n = g.n;
        let lam = (e.log_lambda - k.log_scale).exp();
        let mut d = k.clone();
        for i in 0..n {
            for j in 0..n {
                d.entries[i * n + j] -= lam * e.v[i] * e.v[j];
            }
        }
        let mut v: Vec<f64> = (0..n).map(|i| ((i * 7919) % 13) as f64 - 6.0).collect();
        let mut w = vec![0.0; n];
        let mut l2 = 0.0;
        for _ in 0..2000 {
            d.apply(&v, &mut w);
            l2 = w.iter().zip(&v).map(|(a, b)| a * b).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
            let s = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.iter().map(|x| x / s).collect();
        }
        assert!(l2.abs() < lam);
    }

    #[test]
    fn ratio_is_constant_without_second_neighbours() {
        // the kernel has rank one, so psi_0 is proportional to exp(-beta W1/2)
        let w1 = PairPotential::QuarticW1;
        let g = auto_y_grid(&w1, 1.0, &[0.0], 301).unwrap();
        let (lo, hi) = boundedness_ratio(&w1, &PairPotential::zero(), 1.0, g).unwrap();
        assert!((hi - lo) / hi < 1e-8);
        let (w1, w2) = quartic();
        let (lo, hi) = boundedness_ratio(&w1, &w2, 1.0, g).unwrap();
        assert!(lo > 0.0 && hi.is_finite() && hi / lo > 1.0 + 1e-6);
    }
}
