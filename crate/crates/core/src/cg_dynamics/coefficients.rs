use crate::error::{invalid, Error, Result};
use crate::grid::{GridFunction, UniformGrid};
use crate::potentials::{MolecularSystem, ReactionCoordinate};
use crate::rng::Stream;
use crate::sde::{Bias, Coef, Domain, DynamicsKind, Overdamped, Region, Sampler, Sde1d, TrajectoryConfig};
use crate::stats;
use rayon::prelude::*;
use std::io::Write;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CoefPath {
    /// b = E[-grad V . grad xi + Laplacian(xi)/beta | xi = z]
    Direct,
    /// b = (sigma^2)'/beta - sigma^2 A'
    Identity,
}

impl CoefPath {
    pub fn name(&self) -> &'static str {
        match self {
            CoefPath::Direct => "direct",
            CoefPath::Identity => "identity",
        }
    }
    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "direct" => Some(CoefPath::Direct),
            "identity" => Some(CoefPath::Identity),
            _ => None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct CoefficientConfig {
    /// Per-realization trajectory settings; realization r uses stream r.
    pub traj: TrajectoryConfig,
    pub sampler: Sampler,
    pub realizations: usize,
    pub bins: usize,
    /// Histogram range; defaults to the [0.1%, 99.9%] quantiles of a pilot run
    /// (the full period for periodic coordinates).
    pub range: Option<(f64, f64)>,
    pub min_count: u64,
    /// 3-bin moving average of ln(density) before differentiating.
    pub smooth: bool,
    /// Extra potential U(xi) added during sampling and removed from A afterwards.
    pub bias: Option<Bias>,
}

impl Default for CoefficientConfig {
    fn default() -> Self {
        CoefficientConfig {
            traj: TrajectoryConfig { dt: 1e-3, steps: 2_000_000, seed: 0, burn_in: 10_000, thinning: 10, overflow_guard: 1e6 },
            sampler: Sampler::Mala,
            realizations: 8,
            bins: 256,
            range: None,
            min_count: 100,
            smooth: false,
            bias: None,
        }
    }
}

/// 95% half widths across independent realizations (Student-t); NaN where
/// fewer than two realizations visit the stencil.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientCi {
    pub realizations: usize,
    pub a_prime: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub b_identity: Vec<f64>,
    pub b_direct: Option<Vec<f64>>,
}

/// Coefficients on bin centres. Masked bins carry NaN coefficients.
#[derive(Clone, Debug, PartialEq)]
pub struct CoefficientTable {
    pub rc: String,
    pub beta: f64,
    pub grid: UniformGrid,
    pub periodic: bool,
    pub path: CoefPath,
    pub a: Vec<f64>,
    pub a_prime: Vec<f64>,
    pub b: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub counts: Vec<u64>,
    pub masked: Vec<bool>,
    pub b_identity: Vec<f64>,
    pub b_direct: Option<Vec<f64>>,
    pub ci: Option<CoefficientCi>,
}

#[derive(Clone, Debug, Default)]
struct Acc {
    counts: Vec<u64>,
    g2: Vec<f64>,
    bd: Vec<f64>,
    total: u64,
}

impl Acc {
    fn new(n: usize) -> Self {
        Acc { counts: vec![0; n], g2: vec![0.0; n], bd: vec![0.0; n], total: 0 }
    }
    fn merge(mut self, o: &Acc) -> Self {
        for i in 0..self.counts.len() {
            self.counts[i] += o.counts[i];
            self.g2[i] += o.g2[i];
            self.bd[i] += o.bd[i];
        }
        self.total += o.total;
        self
    }
}

struct Binning {
    lo: f64,
    width: f64,
    n: usize,
    periodic: bool,
}

impl Binning {
    #[inline]
    fn index(&self, xi: f64) -> Option<usize> {
        let t = (xi - self.lo) / self.width;
        if self.periodic {
            return Some((t.rem_euclid(self.n as f64).floor() as usize).min(self.n - 1));
        }
        if t < 0.0 || t >= self.n as f64 {
            None
        } else {
            Some(t as usize)
        }
    }
}

fn check_pairing(system: &MolecularSystem, rc: ReactionCoordinate) -> Result<()> {
    if rc.system_name() != system.name() {
        return invalid(format!("reaction coordinate {} is defined for {}, not {}", rc.name(), rc.system_name(), system.name()));
    }
    Ok(())
}

/// Equilibrium trajectory (optionally biased); calls `observe(grad V, q)` on
/// every thinned state after burn-in.
fn run_trajectory(
    system: &MolecularSystem,
    beta: f64,
    traj: &TrajectoryConfig,
    sampler: Sampler,
    steps: u64,
    bias: Option<&Bias>,
    q0: &[f64],
    stream: u64,
    mut observe: impl FnMut(&[f64], &[f64]),
) -> Result<()> {
    let mut eng = Overdamped::new(system, beta, traj.dt, q0, traj.seed, stream)?.with_bias(bias);
    let step = |e: &mut Overdamped<MolecularSystem>| match sampler {
        Sampler::EulerMaruyama => e.step(),
        Sampler::Mala => {
            e.step_mala();
        }
    };
    for k in 1..=traj.burn_in {
        step(&mut eng);
        if k % 1024 == 0 {
            eng.check(traj.overflow_guard)?;
        }
    }
    for k in 1..=steps {
        step(&mut eng);
        if k % 1024 == 0 {
            eng.check(traj.overflow_guard)?;
        }
        if k % traj.thinning == 0 {
            observe(&eng.grad, &eng.q);
        }
    }
    eng.check(traj.overflow_guard)
}

/// Estimates A, A', b and sigma^2 for `rc` from equilibrium trajectories of `system`.
pub fn estimate_coefficients(
    system: &MolecularSystem,
    rc: ReactionCoordinate,
    beta: f64,
    q0: &[f64],
    cfg: &CoefficientConfig,
    path: CoefPath,
) -> Result<CoefficientTable> {
    check_pairing(system, rc)?;
    cfg.traj.validate()?;
    if !(beta > 0.0) {
        return invalid("beta must be positive");
    }
    if cfg.bins < 3 || cfg.realizations == 0 {
        return invalid("need at least 3 bins and one realization");
    }
    if path == CoefPath::Direct && rc.laplacian(q0).is_none() {
        return invalid(format!("the direct path needs the Laplacian of {}, which is not available", rc.name()));
    }
    if let Some(b) = &cfg.bias {
        if b.rc != rc {
            return invalid("bias must be a function of the same reaction coordinate");
        }
    }
    let bias = cfg.bias.as_ref();
    let periodic = rc.period().is_some();
    let (lo, hi) = match (cfg.range, rc.period()) {
        (Some(r), _) => r,
        (None, Some(p)) => (-0.5 * p, 0.5 * p),
        (None, None) => {
            let pilot_steps = (cfg.traj.steps / 10).max(10 * cfg.traj.thinning);
            let mut xs = Vec::new();
            let mut g = vec![0.0; q0.len()];
            run_trajectory(system, beta, &cfg.traj, cfg.sampler, pilot_steps, bias, q0, cfg.realizations as u64, |_, q| {
                xs.push(rc.eval(q, &mut g));
            })?;
            xs.sort_by(f64::total_cmp);
            (stats::quantile_sorted(&xs, 0.001), stats::quantile_sorted(&xs, 0.999))
        }
    };
    if !(hi > lo) {
        return invalid("empty histogram range");
    }
    let n = cfg.bins;
    let bin = Binning { lo, width: (hi - lo) / n as f64, n, periodic };
    let direct = path == CoefPath::Direct;

    let accs: Result<Vec<Acc>> = (0..cfg.realizations)
        .into_par_iter()
        .map(|r| {
            let mut acc = Acc::new(n);
            let mut g = vec![0.0; q0.len()];
            run_trajectory(system, beta, &cfg.traj, cfg.sampler, cfg.traj.steps, bias, q0, r as u64, |grad_v, q| {
                let xi = rc.eval(q, &mut g);
                acc.total += 1;
                if let Some(i) = bin.index(xi) {
                    acc.counts[i] += 1;
                    acc.g2[i] += g.iter().map(|v| v * v).sum::<f64>();
                    if direct {
                        let dot: f64 = grad_v.iter().zip(&g).map(|(a, b)| a * b).sum();
                        acc.bd[i] += -dot + rc.laplacian(q).unwrap_or(f64::NAN) / beta;
                    }
                }
            })?;
            Ok(acc)
        })
        .collect();
    let accs = accs?;
    let pooled = accs.iter().fold(Acc::new(n), |a, b| a.merge(b));

    let grid = UniformGrid::with_step(lo + 0.5 * bin.width, bin.width, n);
    let masked: Vec<bool> = pooled.counts.iter().map(|&c| c < cfg.min_count).collect();
    if masked.iter().all(|&m| m) {
        return Err(Error::InsufficientSamples(format!("every bin has fewer than {} samples", cfg.min_count)));
    }
    let u: Vec<f64> = (0..n).map(|i| bias.map_or(0.0, |b| b.value.eval(grid.node(i)))).collect();
    let stencil = Stencil::new(&masked, periodic);
    let est = |acc: &Acc| derive(acc, &stencil, &u, beta, bin.width, cfg.smooth, direct);
    let mut main = est(&pooled);
    // only bins above min_count are reported
    for i in 0..n {
        if masked[i] {
            main.a[i] = f64::NAN;
            main.sigma2[i] = f64::NAN;
        }
    }
    let amin = main.a.iter().copied().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min);
    for v in main.a.iter_mut() {
        *v -= amin;
    }

    let ci = if cfg.realizations >= 2 {
        let per: Vec<Derived> = accs.iter().map(est).collect();
        let hw = |f: &dyn Fn(&Derived) -> &Vec<f64>| -> Vec<f64> {
            (0..n)
                .map(|i| {
                    if masked[i] {
                        return f64::NAN;
                    }
                    let xs: Vec<f64> = per.iter().map(|d| f(d)[i]).filter(|v| v.is_finite()).collect();
                    if xs.len() < 2 {
                        f64::NAN
                    } else {
                        stats::mean_ci_t(&xs).1
                    }
                })
                .collect()
        };
        Some(CoefficientCi {
            realizations: cfg.realizations,
            a_prime: hw(&|d| &d.a_prime),
            sigma2: hw(&|d| &d.sigma2),
            b_identity: hw(&|d| &d.b_identity),
            b_direct: if direct { Some(hw(&|d| &d.b_direct)) } else { None },
        })
    } else {
        None
    };

    let b = if direct { main.b_direct.clone() } else { main.b_identity.clone() };
    Ok(CoefficientTable {
        rc: rc.name().to_string(),
        beta,
        grid,
        periodic,
        path,
        a: main.a,
        a_prime: main.a_prime,
        b,
        sigma2: main.sigma2,
        counts: pooled.counts,
        masked,
        b_identity: main.b_identity,
        b_direct: if direct { Some(main.b_direct) } else { None },
        ci,
    })
}

/// Finite-difference stencil that respects the mask: centered where both
/// neighbours are unmasked, second-order one-sided at the edge of an unmasked
/// run (first order when the run is only two bins long).
struct Stencil {
    /// (node, weight) pairs, weights in units of 1/h
    pts: Vec<Option<Vec<(usize, f64)>>>,
}

impl Stencil {
    fn new(masked: &[bool], periodic: bool) -> Self {
        let n = masked.len();
        let nb = |i: usize, d: isize| -> Option<usize> {
            let j = i as isize + d;
            let j = if periodic {
                j.rem_euclid(n as isize) as usize
            } else if j < 0 || j >= n as isize {
                return None;
            } else {
                j as usize
            };
            if masked[j] {
                None
            } else {
                Some(j)
            }
        };
        let pts = (0..n)
            .map(|i| {
                if masked[i] {
                    return None;
                }
                match (nb(i, -1), nb(i, 1)) {
                    (Some(l), Some(r)) => Some(vec![(l, -0.5), (r, 0.5)]),
                    (None, Some(r)) => Some(match nb(r, 1) {
                        Some(r2) if r2 != i => vec![(i, -1.5), (r, 2.0), (r2, -0.5)],
                        _ => vec![(i, -1.0), (r, 1.0)],
                    }),
                    (Some(l), None) => Some(match nb(l, -1) {
                        Some(l2) if l2 != i => vec![(i, 1.5), (l, -2.0), (l2, 0.5)],
                        _ => vec![(i, 1.0), (l, -1.0)],
                    }),
                    (None, None) => None,
                }
            })
            .collect();
        Stencil { pts }
    }

    fn apply(&self, v: &[f64], h: f64) -> Vec<f64> {
        self.pts
            .iter()
            .map(|p| match p {
                Some(w) => w.iter().map(|(j, c)| c * v[*j]).sum::<f64>() / h,
                None => f64::NAN,
            })
            .collect()
    }

    fn is_centered(&self, i: usize) -> Option<(usize, usize)> {
        match &self.pts[i] {
            Some(w) if w.len() == 2 && w[0].1 == -0.5 => Some((w[0].0, w[1].0)),
            _ => None,
        }
    }
}

struct Derived {
    a: Vec<f64>,
    a_prime: Vec<f64>,
    sigma2: Vec<f64>,
    b_identity: Vec<f64>,
    b_direct: Vec<f64>,
}

fn derive(acc: &Acc, st: &Stencil, u: &[f64], beta: f64, width: f64, smooth: bool, direct: bool) -> Derived {
    let n = acc.counts.len();
    let norm = acc.total as f64 * width;
    let mut lnp: Vec<f64> = acc
        .counts
        .iter()
        .map(|&c| if c > 0 { (c as f64 / norm).ln() } else { f64::NAN })
        .collect();
    if smooth {
        let raw = lnp.clone();
        for i in 0..n {
            if let Some((l, r)) = st.is_centered(i) {
                lnp[i] = (raw[l] + raw[i] + raw[r]) / 3.0;
            }
        }
    }
    let a: Vec<f64> = (0..n).map(|i| -lnp[i] / beta - u[i]).collect();
    let a_prime = st.apply(&a, width);
    let sigma2: Vec<f64> =
        (0..n).map(|i| if acc.counts[i] > 0 { acc.g2[i] / acc.counts[i] as f64 } else { f64::NAN }).collect();
    let ds2 = st.apply(&sigma2, width);
    let b_identity = (0..n).map(|i| ds2[i] / beta - sigma2[i] * a_prime[i]).collect();
    let b_direct = if direct {
        (0..n).map(|i| if acc.counts[i] > 0 { acc.bd[i] / acc.counts[i] as f64 } else { f64::NAN }).collect()
    } else {
        Vec::new()
    };
    Derived { a, a_prime, sigma2, b_identity, b_direct }
}

impl CoefficientTable {
    /// Index range of the unmasked bins; errors when a masked bin sits between
    /// unmasked ones (or anywhere, for periodic tables).
    pub fn unmasked_range(&self) -> Result<(usize, usize)> {
        let first = self.masked.iter().position(|&m| !m).ok_or_else(|| Error::MaskedInterior("every bin is masked".into()))?;
        let last = self.masked.iter().rposition(|&m| !m).unwrap();
        let gap = if self.periodic {
            self.masked.iter().position(|&m| m)
        } else {
            (first..=last).find(|&i| self.masked[i])
        };
        if let Some(i) = gap {
            return Err(Error::MaskedInterior(format!(
                "bin {} (z = {}) has {} samples, inside the dynamical range",
                i,
                self.grid.node(i),
                self.counts[i]
            )));
        }
        Ok((first, last))
    }

    fn restrict(&self, v: &[f64]) -> Result<GridFunction> {
        let (first, last) = self.unmasked_range()?;
        let g = UniformGrid::with_step(self.grid.node(first), self.grid.step, last - first + 1);
        GridFunction::new(g, v[first..=last].to_vec(), self.periodic)
    }

    pub fn free_energy(&self) -> Result<GridFunction> {
        self.restrict(&self.a)
    }
    pub fn mean_force(&self) -> Result<GridFunction> {
        self.restrict(&self.a_prime)
    }
    pub fn drift(&self) -> Result<GridFunction> {
        self.restrict(&self.b)
    }
    pub fn sigma(&self) -> Result<GridFunction> {
        let s: Vec<f64> = self.sigma2.iter().map(|v| v.sqrt()).collect();
        self.restrict(&s)
    }

    /// Domain of the 1D dynamics: reflecting at the outer unmasked bin centres.
    pub fn domain(&self) -> Result<Domain> {
        let (first, last) = self.unmasked_range()?;
        Ok(if self.periodic {
            Domain::Periodic { lo: self.grid.lo - 0.5 * self.grid.step, period: self.grid.step * self.grid.n as f64 }
        } else {
            Domain::Reflect { lo: self.grid.node(first), hi: self.grid.node(last) }
        })
    }

    /// Draws `count` values from exp(-beta A) restricted to `region`
    /// (piecewise constant on bins, clipped to the dynamical domain).
    pub fn sample_restricted(&self, region: &Region, count: usize, seed: u64) -> Result<Vec<f64>> {
        let (first, last) = self.unmasked_range()?;
        let h = self.grid.step;
        let (dlo, dhi) = match self.domain()? {
            Domain::Reflect { lo, hi } => (lo, hi),
            _ => (f64::NEG_INFINITY, f64::INFINITY),
        };
        let amin = self.a[first..=last].iter().copied().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = (first..=last)
            .map(|i| if region.contains(self.grid.node(i)) { (-self.beta * (self.a[i] - amin)).exp() } else { 0.0 })
            .collect();
        let total: f64 = w.iter().sum();
        if !(total > 0.0) {
            return Err(Error::InsufficientSamples(format!("no unmasked bin lies in {}", region.describe())));
        }
        let mut cum = Vec::with_capacity(w.len());
        let mut acc = 0.0;
        for v in &w {
            acc += v / total;
            cum.push(acc);
        }
        let mut rng = Stream::new(seed, u64::MAX - 1);
        let mut out = Vec::with_capacity(count);
        let mut tries = 0u64;
        while out.len() < count {
            tries += 1;
            if tries > 1000 * count as u64 + 1000 {
                return Err(Error::InsufficientSamples("restricted sampling rejected too often".into()));
            }
            let u = rng.uniform();
            let k = cum.partition_point(|&c| c < u).min(w.len() - 1);
            let c = self.grid.node(first + k);
            let lo = (c - 0.5 * h).max(dlo);
            let hi = (c + 0.5 * h).min(dhi);
            let mut z = lo + (hi - lo) * rng.uniform();
            if self.periodic {
                z = crate::potentials::wrap_angle(z);
            }
            if region.contains(z) {
                out.push(z);
            }
        }
        Ok(out)
    }

    /// Writes the table as CSV: z, A, A_prime, b, sigma2, count, then the
    /// mask, both drift estimates and the half widths.
    pub fn write_csv(&self, out: &mut impl Write) -> std::io::Result<()> {
        writeln!(out, "z,A,A_prime,b,sigma2,count,masked,b_identity,b_direct,a_prime_hw,sigma2_hw,b_identity_hw,b_direct_hw")?;
        let nan = f64::NAN;
        for i in 0..self.grid.n {
            let ci = self.ci.as_ref();
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{}",
                self.grid.node(i),
                self.a[i],
                self.a_prime[i],
                self.b[i],
                self.sigma2[i],
                self.counts[i],
                self.masked[i] as u8,
                self.b_identity[i],
                self.b_direct.as_ref().map_or(nan, |v| v[i]),
                ci.map_or(nan, |c| c.a_prime[i]),
                ci.map_or(nan, |c| c.sigma2[i]),
                ci.map_or(nan, |c| c.b_identity[i]),
                ci.and_then(|c| c.b_direct.as_ref()).map_or(nan, |v| v[i]),
            )?;
        }
        Ok(())
    }

    /// Reads a table written by `write_csv` (lines starting with '#' are
    /// skipped). Only the first six columns are required; a missing mask
    /// column means "masked iff any coefficient is NaN".
    pub fn parse_csv(text: &str, rc: &str, beta: f64, periodic: bool, path: CoefPath) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim_start().starts_with('#') && !l.trim().is_empty());
        let header: Vec<&str> = lines.next().ok_or_else(|| Error::Config("empty coefficient file".into()))?.split(',').map(str::trim).collect();
        let col = |name: &str| header.iter().position(|h| *h == name);
        let need = ["z", "A", "A_prime", "b", "sigma2", "count"];
        let idx: Vec<usize> = need
            .iter()
            .map(|c| col(c).ok_or_else(|| Error::Config(format!("coefficient file lacks column {c}"))))
            .collect::<Result<_>>()?;
        let (im, ibi, ibd) = (col("masked"), col("b_identity"), col("b_direct"));
        let mut rows: Vec<Vec<f64>> = Vec::new();
        for (k, l) in lines.enumerate() {
            let r: std::result::Result<Vec<f64>, _> = l.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let r = r.map_err(|e| Error::Config(format!("coefficient file row {}: {e}", k + 1)))?;
            if r.len() != header.len() {
                return Err(Error::Config(format!("coefficient file row {} has {} fields", k + 1, r.len())));
            }
            rows.push(r);
        }
        if rows.len() < 3 {
            return Err(Error::Config("coefficient file needs at least 3 rows".into()));
        }
        let z: Vec<f64> = rows.iter().map(|r| r[idx[0]]).collect();
        let h = (z[z.len() - 1] - z[0]) / (z.len() - 1) as f64;
        if !(h > 0.0) || z.windows(2).any(|w| ((w[1] - w[0]) - h).abs() > 1e-6 * h.abs().max(1.0)) {
            return Err(Error::Config("coefficient grid must be uniform and increasing".into()));
        }
        let get = |j: usize| -> Vec<f64> { rows.iter().map(|r| r[j]).collect() };
        let (a, a_prime, b, sigma2) = (get(idx[1]), get(idx[2]), get(idx[3]), get(idx[4]));
        let counts: Vec<u64> = rows.iter().map(|r| r[idx[5]].max(0.0) as u64).collect();
        let masked: Vec<bool> = match im {
            Some(j) => rows.iter().map(|r| r[j] != 0.0).collect(),
            None => (0..rows.len()).map(|i| !(a[i].is_finite() && a_prime[i].is_finite() && b[i].is_finite() && sigma2[i] > 0.0)).collect(),
        };
        Ok(CoefficientTable {
            rc: rc.to_string(),
            beta,
            grid: UniformGrid::with_step(z[0], h, z.len()),
            periodic,
            path,
            b_identity: ibi.map_or_else(|| b.clone(), get),
            b_direct: ibd.map(get).filter(|v| v.iter().any(|x| x.is_finite())),
            a,
            a_prime,
            b,
            sigma2,
            counts,
            masked,
            ci: None,
        })
    }
}

/// Bin-wise comparison of the direct and identity drift estimates.
#[derive(Clone, Debug, PartialEq)]
pub struct PathAgreement {
    /// Bins with at least `min_count` samples and both half widths available.
    pub bins: usize,
    /// Indices of bins whose difference exceeds the simultaneous bound.
    pub disagreements: Vec<usize>,
    /// max over tested bins of |b_direct - b_identity| / bound
    pub max_ratio: f64,
}

/// Tests |b_direct - b_identity| <= t * sqrt(se_d^2 + se_i^2) on every bin
/// with at least `min_count` samples, with the Student-t quantile at the
/// Bonferroni level 1 - 0.025/M so that the statement holds jointly over the
/// M tested bins at 95%.
pub fn path_agreement(table: &CoefficientTable, min_count: u64) -> Result<PathAgreement> {
    let (Some(bd), Some(ci)) = (table.b_direct.as_ref(), table.ci.as_ref()) else {
        return invalid("path comparison needs a direct-path table with confidence intervals");
    };
    let hd = ci.b_direct.as_ref().ok_or_else(|| Error::InvalidParameter("missing direct half widths".into()))?;
    let t95 = stats::t_quantile_975(ci.realizations - 1);
    let tested: Vec<usize> = (0..table.grid.n)
        .filter(|&i| table.counts[i] >= min_count && hd[i].is_finite() && ci.b_identity[i].is_finite())
        .collect();
    if tested.is_empty() {
        return Err(Error::InsufficientSamples(format!("no bin has {min_count} samples")));
    }
    let tq = stats::t_quantile(1.0 - 0.025 / tested.len() as f64, ci.realizations - 1);
    let mut out = PathAgreement { bins: tested.len(), disagreements: Vec::new(), max_ratio: 0.0 };
    for &i in &tested {
        let se = ((hd[i] / t95).powi(2) + (ci.b_identity[i] / t95).powi(2)).sqrt();
        let r = (bd[i] - table.b_identity[i]).abs() / (tq * se);
        out.max_ratio = out.max_ratio.max(r);
        if r > 1.0 {
            out.disagreements.push(i);
        }
    }
    Ok(out)
}

/// One-dimensional dynamics from a table: effective (drift b, diffusion sigma)
/// or free-energy (drift -A', unit diffusion). Linear interpolation between nodes.
pub fn make_sde(table: &CoefficientTable, kind: DynamicsKind) -> Result<Sde1d> {
    let domain = table.domain()?;
    match kind {
        DynamicsKind::Effective => {
            let sigma = table.sigma()?;
            if sigma.values.iter().any(|s| !(*s > 0.0)) {
                return invalid("sigma^2 must be positive on every unmasked bin");
            }
            Sde1d::new(Coef::Grid(table.drift()?), Coef::Grid(sigma), table.beta, domain)
        }
        DynamicsKind::FreeEnergy => {
            let mut d = table.mean_force()?;
            d.values.iter_mut().for_each(|v| *v = -*v);
            Sde1d::new(Coef::Grid(d), Coef::Const(1.0), table.beta, domain)
        }
        DynamicsKind::Full => invalid("the full dynamics is not one-dimensional"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potentials::{ThreeAtom, Toy2d};

    fn separable() -> MolecularSystem {
        MolecularSystem::Toy2d(Toy2d { k: 5.0, c: 0.0 })
    }

    fn quick_cfg() -> CoefficientConfig {
        CoefficientConfig {
            traj: TrajectoryConfig { dt: 1e-3, steps: 400_000, seed: 3, burn_in: 5_000, thinning: 5, overflow_guard: 1e6 },
            realizations: 6,
            bins: 40,
            range: Some((-1.6, 1.6)),
            ..Default::default()
        }
    }

    #[test]
    fn separable_toy_recovers_exact_coefficients() {
        let s = separable();
        let t = estimate_coefficients(&s, ReactionCoordinate::ToyX, 1.0, &[1.0, 0.0], &quick_cfg(), CoefPath::Direct).unwrap();
        let ci = t.ci.as_ref().unwrap();
        let mut outside = 0;
        for i in 0..t.grid.n {
            if t.masked[i] {
                continue;
            }
            let x = t.grid.node(i);
            assert!((t.sigma2[i] - 1.0).abs() < 1e-12);
            let v1 = 4.0 * x * (x * x - 1.0);
            // centered differences of ln(bin mass) are exact up to O(h^2)
            let tol = |hw: f64| 3.0 * hw + 0.02 * (1.0 + v1.abs());
            if (t.a_prime[i] - v1).abs() > tol(ci.a_prime[i]) {
                outside += 1;
            }
            assert!((t.b_direct.as_ref().unwrap()[i] + v1).abs() < tol(ci.b_direct.as_ref().unwrap()[i]), "bin {i}");
            // identity b with sigma^2 = 1 is -A'
            assert!((t.b_identity[i] + t.a_prime[i]).abs() < 1e-12);
        }
        assert!(outside <= 2, "{outside} bins outside");
    }

    #[test]
    fn identity_relation_holds_exactly() {
        let s = MolecularSystem::Toy2d(Toy2d::default());
        let mut cfg = quick_cfg();
        cfg.traj.steps = 100_000;
        let t = estimate_coefficients(&s, ReactionCoordinate::ToyX, 1.0, &[1.0, 1.0], &cfg, CoefPath::Identity).unwrap();
        let h = t.grid.step;
        for i in 1..t.grid.n - 1 {
            if t.masked[i - 1] || t.masked[i] || t.masked[i + 1] {
                continue;
            }
            let ds2 = (t.sigma2[i + 1] - t.sigma2[i - 1]) / (2.0 * h);
            assert!((t.b[i] - (ds2 / t.beta - t.sigma2[i] * t.a_prime[i])).abs() < 1e-12);
        }
    }

    #[test]
    fn direct_path_needs_a_laplacian() {
        let s = MolecularSystem::ThreeAtom(ThreeAtom::default());
        let q0 = s.default_configuration();
        assert!(estimate_coefficients(&s, ReactionCoordinate::Angle, 1.0, &q0, &quick_cfg(), CoefPath::Direct).is_err());
        assert!(estimate_coefficients(&s, ReactionCoordinate::ToyX, 1.0, &q0, &quick_cfg(), CoefPath::Identity).is_err());
    }

    #[test]
    fn starved_bins_are_masked_and_gaps_rejected() {
        let s = separable();
        let mut cfg = quick_cfg();
        cfg.traj.steps = 50_000;
        cfg.range = Some((-3.0, 3.0));
        cfg.min_count = 50;
        let t = estimate_coefficients(&s, ReactionCoordinate::ToyX, 1.0, &[1.0, 0.0], &cfg, CoefPath::Identity).unwrap();
        assert!(t.masked[0] && t.masked[t.grid.n - 1]);
        assert!(t.a[0].is_nan() && t.sigma2[0].is_nan());
        let (f, l) = t.unmasked_range().unwrap();
        let mut g = t.clone();
        g.masked[(f + l) / 2] = true;
        assert!(matches!(make_sde(&g, DynamicsKind::Effective), Err(Error::MaskedInterior(_))));
        match make_sde(&t, DynamicsKind::Effective).unwrap().domain {
            Domain::Reflect { lo, hi } => assert!(lo == t.grid.node(f) && hi == t.grid.node(l)),
            d => panic!("{d:?}"),
        }
    }

    fn synthetic(n: usize) -> CoefficientTable {
        let grid = UniformGrid::new(-1.5, 1.5, n).unwrap();
        let a: Vec<f64> = grid.nodes().iter().map(|x| (x * x - 1.0).powi(2)).collect();
        let ap: Vec<f64> = grid.nodes().iter().map(|x| 4.0 * x * (x * x - 1.0)).collect();
        let b: Vec<f64> = ap.iter().map(|v| -v).collect();
        CoefficientTable {
            rc: "x".into(),
            beta: 1.0,
            grid,
            periodic: false,
            path: CoefPath::Identity,
            a,
            a_prime: ap,
            b: b.clone(),
            sigma2: vec![1.0; n],
            counts: vec![500; n],
            masked: vec![false; n],
            b_identity: b,
            b_direct: None,
            ci: None,
        }
    }

    #[test]
    fn degenerate_closures_coincide() {
        let t = synthetic(61);
        let e = make_sde(&t, DynamicsKind::Effective).unwrap();
        let f = make_sde(&t, DynamicsKind::FreeEnergy).unwrap();
        let (mut r1, mut r2) = (Stream::new(1, 0), Stream::new(1, 0));
        let (mut z1, mut z2) = (0.9, 0.9);
        for _ in 0..10_000 {
            z1 = e.step(z1, 1e-3, &mut r1);
            z2 = f.step(z2, 1e-3, &mut r2);
        }
        assert!((z1 - z2).abs() < 1e-12, "{z1} {z2}");
        assert!(make_sde(&t, DynamicsKind::Full).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let mut t = synthetic(21);
        t.masked[0] = true;
        t.a[0] = f64::NAN;
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = format!("# seed=1\n{}", String::from_utf8(buf).unwrap());
        let r = CoefficientTable::parse_csv(&text, "x", 1.0, false, CoefPath::Identity).unwrap();
        assert_eq!(r.masked, t.masked);
        assert_eq!(r.counts, t.counts);
        for i in 1..21 {
            assert_eq!(r.a[i], t.a[i]);
            assert_eq!(r.b[i], t.b[i]);
            assert!((r.grid.node(i) - t.grid.node(i)).abs() < 1e-12);
        }
        assert!(CoefficientTable::parse_csv("z,A\n1,2\n", "x", 1.0, false, CoefPath::Identity).is_err());
    }

    #[test]
    fn restricted_sampling_stays_in_region() {
        let t = synthetic(61);
        let region = Region::Above(0.3);
        let zs = t.sample_restricted(&region, 2000, 4).unwrap();
        assert!(zs.iter().all(|&z| z > 0.3 && z <= 1.5));
        // mass concentrates around the minimum at 1
        let m = crate::stats::mean(&zs);
        assert!((m - 1.0).abs() < 0.1, "{m}");
    }
}
