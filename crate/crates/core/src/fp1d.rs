//! Fokker-Planck solver for one-dimensional diffusions and density diagnostics.

use crate::cg_dynamics::{make_sde, CoefficientTable};
use crate::error::{invalid, Error, Result};
use crate::grid::{solve_cyclic_tridiagonal, solve_tridiagonal, UniformGrid};
use crate::potentials::{MolecularSystem, ReactionCoordinate};
use crate::rng::Stream;
use crate::sde::{simulate_overdamped, Domain, DynamicsKind, Sde1d, TrajectoryConfig};

/// Nonnegative density on a uniform grid, normalized with trapezoid weights
/// (uniform weights when periodic).
#[derive(Clone, Debug, PartialEq)]
pub struct DensityGrid {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub periodic: bool,
}

fn weights(grid: &UniformGrid, periodic: bool) -> Vec<f64> {
    if periodic {
        vec![grid.step; grid.n]
    } else {
        grid.trapezoid_weights()
    }
}

impl DensityGrid {
    /// Normalizes `values`; errors on negative or non-finite entries or zero mass.
    pub fn new(grid: UniformGrid, values: Vec<f64>, periodic: bool) -> Result<Self> {
        if values.len() != grid.n || grid.n < 3 {
            return invalid("density needs one value per node and at least 3 nodes");
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("density values must be finite and nonnegative");
        }
        let mut d = DensityGrid { grid, values, periodic };
        let m = d.mass();
        if !(m > 0.0) {
            return invalid("density has zero mass");
        }
        d.values.iter_mut().for_each(|v| *v /= m);
        Ok(d)
    }

    pub fn from_fn(grid: UniformGrid, periodic: bool, f: impl Fn(f64) -> f64) -> Result<Self> {
        let v = grid.nodes().into_iter().map(f).collect();
        Self::new(grid, v, periodic)
    }

    /// Density proportional to exp(-beta A) at the nodes.
    pub fn boltzmann(grid: UniformGrid, periodic: bool, a: &[f64], beta: f64) -> Result<Self> {
        let amin = a.iter().copied().fold(f64::INFINITY, f64::min);
        Self::new(grid, a.iter().map(|v| (-beta * (v - amin)).exp()).collect(), periodic)
    }

    pub fn weights(&self) -> Vec<f64> {
        weights(&self.grid, self.periodic)
    }

    pub fn mass(&self) -> f64 {
        self.weights().iter().zip(&self.values).map(|(w, v)| w * v).sum()
    }

    pub fn mean(&self) -> f64 {
        let w = self.weights();
        (0..self.grid.n).map(|i| w[i] * self.values[i] * self.grid.node(i)).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        let w = self.weights();
        (0..self.grid.n).map(|i| w[i] * self.values[i] * (self.grid.node(i) - m).powi(2)).sum()
    }

    fn same_grid(&self, o: &DensityGrid) -> Result<()> {
        let (a, b) = (&self.grid, &o.grid);
        if a.n != b.n || self.periodic != o.periodic || (a.lo - b.lo).abs() > 1e-12 * a.step || (a.step - b.step).abs() > 1e-12 * a.step {
            return Err(Error::InvalidParameter("densities live on different grids".into()));
        }
        Ok(())
    }
}

/// Relative entropy H(p|q) = int p ln(p/q), with 0 ln 0 = 0. Returns +infinity
/// when q vanishes where p does not.
pub fn relative_entropy(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.same_grid(q)?;
    let w = p.weights();
    let mut h = 0.0;
    for i in 0..p.grid.n {
        let (a, b) = (p.values[i], q.values[i]);
        if a > 0.0 {
            if b <= 0.0 {
                return Ok(f64::INFINITY);
            }
            h += w[i] * a * (a / b).ln();
        }
    }
    Ok(h)
}

/// Total variation as the L1 distance int |p - q|.
pub fn total_variation(p: &DensityGrid, q: &DensityGrid) -> Result<f64> {
    p.same_grid(q)?;
    let w = p.weights();
    Ok((0..p.grid.n).map(|i| w[i] * (p.values[i] - q.values[i]).abs()).sum())
}

/// x / (e^x - 1)
fn bernoulli(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - 0.5 * x
    } else {
        x / x.exp_m1()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FpTrajectory {
    pub times: Vec<f64>,
    pub densities: Vec<DensityGrid>,
    /// max over steps of |mass - 1|
    pub max_mass_error: f64,
    /// max over steps of the mass change in one step
    pub max_step_mass_change: f64,
}

/// Crank-Nicolson finite-volume solution of d_t phi = d_z(-b phi + d_z(D phi)),
/// D = sigma^2 / beta, with exponentially fitted fluxes. Records the initial
/// state and every `record_every`-th step (and the last one).
pub fn solve_fp(sde: &Sde1d, init: &DensityGrid, dt: f64, t_final: f64, record_every: usize) -> Result<FpTrajectory> {
    if !(dt > 0.0) || !(t_final >= 0.0) {
        return invalid("dt must be positive and t_final nonnegative");
    }
    let g = init.grid;
    let n = g.n;
    let h = g.step;
    let periodic = init.periodic;
    match sde.domain {
        Domain::Periodic { period, .. } if !periodic || (period - h * n as f64).abs() > 1e-9 * period => {
            return invalid("periodic sde needs a periodic density grid covering one period")
        }
        Domain::Reflect { .. } | Domain::Line if periodic => return invalid("periodic density grid needs a periodic sde"),
        _ => {}
    }
    let d = |z: f64| sde.sigma.eval(z).powi(2) / sde.beta;
    // flux through interface k (between node k and k+1, wrapped when periodic):
    // J = alpha_k phi_k - gamma_k phi_{k+1}
    let n_if = if periodic { n } else { n - 1 };
    let mut alpha = vec![0.0; n_if];
    let mut gamma = vec![0.0; n_if];
    for k in 0..n_if {
        let (z0, z1) = (g.lo + k as f64 * h, g.lo + (k + 1) as f64 * h);
        let zm = 0.5 * (z0 + z1);
        let (d0, dm, d1) = (d(z0), d(zm), d(z1));
        if !(d0 > 0.0 && dm > 0.0 && d1 > 0.0) {
            return Err(Error::NonFinite("diffusion must be positive on the grid".into()));
        }
        let p = h * (sde.drift.eval(z0) / d0 + 4.0 * sde.drift.eval(zm) / dm + sde.drift.eval(z1) / d1) / 6.0;
        if !p.is_finite() {
            return Err(Error::NonFinite("drift is not finite on the grid".into()));
        }
        alpha[k] = bernoulli(-p) * d0 / h;
        gamma[k] = bernoulli(p) * d1 / h;
    }
    // w_i dphi_i/dt = (L phi)_i
    let mut sub = vec![0.0; n];
    let mut diag = vec![0.0; n];
    let mut sup = vec![0.0; n];
    let (mut corner_bl, mut corner_tr) = (0.0, 0.0);
    for k in 0..n_if {
        let (i, j) = (k, (k + 1) % n);
        // J leaves i and enters j
        diag[i] -= alpha[k];
        diag[j] -= gamma[k];
        if j == i + 1 {
            sup[i] += gamma[k];
            sub[j] += alpha[k];
        } else {
            // row n-1 gains gamma phi_0, row 0 gains alpha phi_{n-1}
            corner_bl += gamma[k];
            corner_tr += alpha[k];
        }
    }
    let w = init.weights();
    let lhs_sub: Vec<f64> = sub.iter().map(|v| -0.5 * v).collect();
    let lhs_sup: Vec<f64> = sup.iter().map(|v| -0.5 * v).collect();
    let lhs_diag: Vec<f64> = (0..n).map(|i| w[i] / dt - 0.5 * diag[i]).collect();

    let steps = (t_final / dt).round() as usize;
    let every = record_every.max(1);
    let mut phi = init.values.clone();
    let mut out = FpTrajectory { times: vec![0.0], densities: vec![init.clone()], max_mass_error: 0.0, max_step_mass_change: 0.0 };
    let mut prev_mass = init.mass();
    let mut rhs = vec![0.0; n];
    for s in 1..=steps {
        for i in 0..n {
            let mut l = diag[i] * phi[i];
            if i > 0 {
                l += sub[i] * phi[i - 1];
            }
            if i + 1 < n {
                l += sup[i] * phi[i + 1];
            }
            if periodic {
                if i == 0 {
                    l += corner_tr * phi[n - 1];
                }
                if i == n - 1 {
                    l += corner_bl * phi[0];
                }
            }
            rhs[i] = w[i] / dt * phi[i] + 0.5 * l;
        }
        if periodic {
            solve_cyclic_tridiagonal(&lhs_sub, &lhs_diag, &lhs_sup, -0.5 * corner_bl, -0.5 * corner_tr, &mut rhs);
        } else {
            solve_tridiagonal(&lhs_sub, &lhs_diag, &lhs_sup, &mut rhs);
        }
        std::mem::swap(&mut phi, &mut rhs);
        let min = phi.iter().copied().fold(f64::INFINITY, f64::min);
        if !(min >= -1e-10) {
            return Err(Error::NegativeDensity(format!(
                "density reached {min:e} at t = {}; retry with dt <= {:e}",
                s as f64 * dt,
                dt / 4.0
            )));
        }
        let mass: f64 = w.iter().zip(&phi).map(|(a, b)| a * b).sum();
        out.max_mass_error = out.max_mass_error.max((mass - 1.0).abs());
        out.max_step_mass_change = out.max_step_mass_change.max((mass - prev_mass).abs());
        prev_mass = mass;
        if s % every == 0 || s == steps {
            out.times.push(s as f64 * dt);
            // tiny negative round-off is clipped for the recorded snapshot only
            let v: Vec<f64> = phi.iter().map(|v| v.max(0.0)).collect();
            out.densities.push(DensityGrid { grid: g, values: v, periodic });
        }
    }
    Ok(out)
}

/// Histogram density of a long 1D trajectory on the nodes of `grid`
/// (bins centred on the nodes).
pub fn empirical_density(sde: &Sde1d, grid: UniformGrid, periodic: bool, z0: f64, dt: f64, steps: u64, seed: u64) -> Result<DensityGrid> {
    let mut rng = Stream::new(seed, 0);
    let mut z = z0;
    let mut counts = vec![0.0; grid.n];
    let stepper = sde.stepper(dt);
    for _ in 0..steps {
        z = stepper.advance(z, &mut rng);
        if let Some(i) = bin_of(&grid, periodic, z) {
            counts[i] += 1.0;
        }
    }
    if !z.is_finite() {
        return Err(Error::NonFinite("1D trajectory".into()));
    }
    DensityGrid::new(grid, counts, periodic)
}

fn bin_of(grid: &UniformGrid, periodic: bool, z: f64) -> Option<usize> {
    let t = ((z - grid.lo) / grid.step).round();
    if periodic {
        return Some((t.rem_euclid(grid.n as f64) as usize) % grid.n);
    }
    if t < 0.0 || t > (grid.n - 1) as f64 {
        None
    } else {
        Some(t as usize)
    }
}

#[derive(Clone, Debug)]
pub struct StationarityConfig {
    /// Full-dynamics trajectory for the histogram.
    pub traj: TrajectoryConfig,
    pub fp_dt: f64,
    pub fp_t_final: f64,
}

impl Default for StationarityConfig {
    fn default() -> Self {
        StationarityConfig {
            traj: TrajectoryConfig { dt: 1e-3, steps: 5_000_000, seed: 0, burn_in: 10_000, thinning: 10, overflow_guard: 1e6 },
            fp_dt: 1e-3,
            fp_t_final: 20.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StationarityReport {
    /// (pair name, total variation)
    pub pairs: Vec<(String, f64)>,
    pub histogram: DensityGrid,
    pub fp_limit: DensityGrid,
    pub boltzmann: DensityGrid,
}

impl StationarityReport {
    pub fn max_tv(&self) -> f64 {
        self.pairs.iter().map(|p| p.1).fold(0.0, f64::max)
    }
}

/// Compares, on the unmasked bins of `table`: the full-dynamics histogram of
/// xi, the long-time Fokker-Planck solution of the effective dynamics, and
/// exp(-beta A)/Z.
pub fn marginal_stationarity_check(
    system: &MolecularSystem,
    rc: ReactionCoordinate,
    table: &CoefficientTable,
    q0: &[f64],
    cfg: &StationarityConfig,
) -> Result<StationarityReport> {
    let (first, last) = table.unmasked_range()?;
    let grid = UniformGrid::with_step(table.grid.node(first), table.grid.step, last - first + 1);
    let periodic = table.periodic;
    let mut counts = vec![0.0; grid.n];
    let mut g = vec![0.0; q0.len()];
    for item in simulate_overdamped(system, table.beta, &cfg.traj, q0, 0)? {
        let (_, q) = item?;
        if let Some(i) = bin_of(&grid, periodic, rc.eval(&q, &mut g)) {
            counts[i] += 1.0;
        }
    }
    let histogram = DensityGrid::new(grid, counts, periodic)?;
    let boltzmann = DensityGrid::boltzmann(grid, periodic, &table.a[first..=last], table.beta)?;
    let sde = make_sde(table, DynamicsKind::Effective)?;
    let init = DensityGrid::new(grid, vec![1.0; grid.n], periodic)?;
    let run = solve_fp(&sde, &init, cfg.fp_dt, cfg.fp_t_final, usize::MAX)?;
    let fp_limit = run.densities.last().unwrap().clone();
    let pairs = vec![
        ("histogram-fp".to_string(), total_variation(&histogram, &fp_limit)?),
        ("histogram-boltzmann".to_string(), total_variation(&histogram, &boltzmann)?),
        ("fp-boltzmann".to_string(), total_variation(&fp_limit, &boltzmann)?),
    ];
    Ok(StationarityReport { pairs, histogram, fp_limit, boltzmann })
}
