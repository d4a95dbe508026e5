use super::config::{key, parse_f64};
use super::output::csv;
use super::{Emitter, Key, Leaf, RunConfig};
use crate::cg_dynamics::{
    entropy_bound_constants, estimate_coefficients, fit_arrhenius, kramers_time, make_sde, path_agreement, rescale_by_sigma, CoefPath,
    CoefficientConfig, CoefficientTable,
};
use crate::error::{Error, Result};
use crate::fp1d::{marginal_stationarity_check, relative_entropy, solve_fp, total_variation, DensityGrid, StationarityConfig};
use crate::grid::{GridFunction, UniformGrid};
use crate::potentials::{MolecularSystem, ReactionCoordinate};
use crate::sde::{
    harvest_well_samples, residence_times, simulate_overdamped, Bias, Coef, Domain, Dynamics, DynamicsKind, Initials, Region,
    ResidenceConfig, Sampler, Sde1d, TrajectoryConfig,
};
use crate::stats;
use std::f64::consts::{FRAC_PI_2, PI};

fn cfg_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

fn g(v: f64) -> String {
    format!("{v}")
}

fn with(mut base: Vec<Key>, extra: Vec<Key>) -> Vec<Key> {
    base.extend(extra);
    base
}

fn output() -> Vec<Key> {
    vec![
        key("out", "", "output CSV path"),
        key("svg", "no", "also write an SVG plot (yes/no)"),
        key("svg-x", "", "column for the SVG x axis"),
        key("svg-y", "", "column for the SVG y axis"),
        key("workers", "", "worker threads"),
    ]
}

fn system_keys() -> Vec<Key> {
    vec![
        key("system", "three-atom", "toy2d, three-atom or butane"),
        key("rc", "angle", "x, angle, distance-squared or dihedral"),
        key("params", "", "system parameter overrides, name=value,..."),
        key("beta", "1", "inverse temperature"),
    ]
}

fn traj_keys(steps: &'static str, burn_in: &'static str, thinning: &'static str) -> Vec<Key> {
    vec![
        key("dt", "1e-3", "time step"),
        key("steps", steps, "production steps"),
        key("burn-in", burn_in, "discarded steps"),
        key("thinning", thinning, "observation stride"),
        key("seed", "0", "master seed (CG_SEED overrides)"),
        key("overflow-guard", "1e6", "abort when a coordinate exceeds this"),
    ]
}

fn coef_keys(realizations: &'static str) -> Vec<Key> {
    vec![
        key("sampler", "mala", "mala or euler-maruyama"),
        key(realizations, "8", "independent trajectories for the coefficients"),
        key("bins", "256", "histogram bins"),
        key("range-lo", "", "histogram range start"),
        key("range-hi", "", "histogram range end"),
        key("min-count", "100", "bins with fewer samples are masked"),
        key("smooth", "no", "3-bin moving average of ln density (yes/no)"),
        key("bias", "none", "sampling bias: none, torsion, w3 or table:FILE"),
        key("path", "identity", "drift estimator: identity or direct"),
    ]
}

fn system(cfg: &RunConfig) -> Result<MolecularSystem> {
    let name = cfg.str("system")?;
    let mut s = MolecularSystem::from_name(name).ok_or_else(|| Error::Config(format!("unknown system '{name}'")))?;
    if let Some(p) = cfg.get("params") {
        for item in p.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let Some((k, v)) = item.split_once('=') else {
                return cfg_err(format!("params: expected name=value, got '{item}'"));
            };
            let v = parse_f64(v).ok_or_else(|| Error::Config(format!("params: '{v}' is not a number")))?;
            let slot = match (&mut s, k.trim()) {
                (MolecularSystem::Toy2d(t), "k") => &mut t.k,
                (MolecularSystem::Toy2d(t), "c") => &mut t.c,
                (MolecularSystem::ThreeAtom(t), "eps") => &mut t.eps,
                (MolecularSystem::ThreeAtom(t), "k-theta" | "k_theta") => &mut t.k_theta,
                (MolecularSystem::ThreeAtom(t), "l-eq" | "l_eq") => &mut t.l_eq,
                (MolecularSystem::ThreeAtom(t), "theta-saddle" | "theta_saddle") => &mut t.theta_saddle,
                (MolecularSystem::ThreeAtom(t), "delta-theta" | "delta_theta") => &mut t.delta_theta,
                (MolecularSystem::Butane(b), "k2") => &mut b.k2,
                (MolecularSystem::Butane(b), "k3") => &mut b.k3,
                (MolecularSystem::Butane(b), "l-eq" | "l_eq") => &mut b.l_eq,
                (MolecularSystem::Butane(b), "theta-eq" | "theta_eq") => &mut b.theta_eq,
                (MolecularSystem::Butane(b), "c1") => &mut b.c1,
                (MolecularSystem::Butane(b), "c2") => &mut b.c2,
                (MolecularSystem::Butane(b), "c3") => &mut b.c3,
                (_, k) => return cfg_err(format!("{name} has no parameter '{k}'")),
            };
            *slot = v;
        }
    }
    Ok(s)
}

fn rc(cfg: &RunConfig) -> Result<ReactionCoordinate> {
    let v = cfg.str("rc")?;
    ReactionCoordinate::from_name(v).ok_or_else(|| Error::Config(format!("unknown reaction coordinate '{v}'")))
}

fn start_configuration(cfg: &RunConfig, s: &MolecularSystem) -> Result<Vec<f64>> {
    match cfg.get("q0") {
        None => Ok(s.default_configuration()),
        Some(_) => {
            let q = cfg.list_f64("q0")?;
            if q.len() != crate::potentials::Potential::dof(s) {
                return cfg_err(format!("q0 needs {} values", crate::potentials::Potential::dof(s)));
            }
            Ok(q)
        }
    }
}

fn trajectory(cfg: &RunConfig) -> Result<TrajectoryConfig> {
    Ok(TrajectoryConfig {
        dt: cfg.f64("dt")?,
        steps: cfg.u64("steps")?,
        seed: cfg.u64("seed")?,
        burn_in: cfg.u64("burn-in")?,
        thinning: cfg.u64("thinning")?,
        overflow_guard: cfg.f64("overflow-guard")?,
    })
}

/// Default metastable well and exit set of each coordinate.
fn default_wells(rc: ReactionCoordinate) -> (Region, Region) {
    match rc {
        ReactionCoordinate::Angle => (Region::Above(FRAC_PI_2 + 0.15), Region::Below(FRAC_PI_2 - 0.15)),
        ReactionCoordinate::DistanceSquared => (Region::Above(2.4), Region::Below(1.6)),
        ReactionCoordinate::Dihedral => (
            Region::NearAngles { centres: vec![0.0], radius: 0.5 },
            Region::NearAngles { centres: vec![2.0 * PI / 3.0, -2.0 * PI / 3.0], radius: 0.5 },
        ),
        _ => (Region::Above(0.5), Region::Below(-0.5)),
    }
}

fn wells(cfg: &RunConfig, rc: ReactionCoordinate) -> Result<(Region, Region)> {
    let (s, e) = default_wells(rc);
    let s = match cfg.get("start") {
        Some(v) => Region::parse(v)?,
        None => s,
    };
    let e = match cfg.get("exit") {
        Some(v) => Region::parse(v)?,
        None => e,
    };
    Ok((s, e))
}

fn read(path: &str) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {path}: {e}")))
}

/// `# key = value` lines of a file written by this tool.
fn header_value(text: &str, name: &str) -> Option<String> {
    text.lines().take_while(|l| l.starts_with('#')).find_map(|l| {
        let (k, v) = l.trim_start_matches('#').split_once('=')?;
        (k.trim() == name).then(|| v.trim().to_string())
    })
}

/// Loads a table written by `coeffs`; its header supplies rc, beta and path.
fn load_table(path: &str) -> Result<CoefficientTable> {
    let text = read(path)?;
    let rc_name = header_value(&text, "rc").ok_or_else(|| Error::Config(format!("{path}: header lacks 'rc'")))?;
    let rc = ReactionCoordinate::from_name(&rc_name).ok_or_else(|| Error::Config(format!("{path}: unknown rc '{rc_name}'")))?;
    let beta = header_value(&text, "beta").and_then(|v| parse_f64(&v)).ok_or_else(|| Error::Config(format!("{path}: header lacks 'beta'")))?;
    let cp = header_value(&text, "path").and_then(|v| CoefPath::from_name(&v)).unwrap_or(CoefPath::Identity);
    CoefficientTable::parse_csv(&text, rc.name(), beta, rc.period().is_some(), cp)
}

fn bias(cfg: &RunConfig, s: &MolecularSystem, rc: ReactionCoordinate) -> Result<Option<Bias>> {
    let v = cfg.str("bias")?;
    match (v, s) {
        ("none", _) => Ok(None),
        ("torsion", MolecularSystem::Butane(b)) if rc == ReactionCoordinate::Dihedral => Ok(Some(Bias::butane_torsion(b))),
        ("w3", MolecularSystem::ThreeAtom(t)) if rc == ReactionCoordinate::Angle => Ok(Some(Bias::three_atom_barrier(t))),
        ("torsion" | "w3", _) => cfg_err(format!("bias '{v}' does not apply to {} with rc {}", s.name(), rc.name())),
        _ => {
            let Some(p) = v.strip_prefix("table:") else {
                return cfg_err(format!("unknown bias '{v}'"));
            };
            // U = -A of a previous table: the biased law is nearly flat in xi
            let t = load_table(p)?;
            let mut a = t.free_energy()?;
            a.values.iter_mut().for_each(|x| *x = -*x);
            Ok(Some(Bias::from_values(rc, a)))
        }
    }
}

fn coefficient_config(cfg: &RunConfig, s: &MolecularSystem, rc: ReactionCoordinate, traj: TrajectoryConfig, realizations: &str) -> Result<CoefficientConfig> {
    let range = match (cfg.opt_f64("range-lo")?, cfg.opt_f64("range-hi")?) {
        (Some(a), Some(b)) => Some((a, b)),
        (None, None) => None,
        _ => return cfg_err("range-lo and range-hi must be given together"),
    };
    Ok(CoefficientConfig {
        traj,
        sampler: Sampler::from_name(cfg.str("sampler")?).ok_or_else(|| Error::Config("sampler must be mala or euler-maruyama".into()))?,
        realizations: cfg.usize(realizations)?,
        bins: cfg.usize("bins")?,
        range,
        min_count: cfg.u64("min-count")?,
        smooth: cfg.flag("smooth")?,
        bias: bias(cfg, s, rc)?,
    })
}

fn coef_path(cfg: &RunConfig) -> Result<CoefPath> {
    let v = cfg.str("path")?;
    CoefPath::from_name(v).ok_or_else(|| Error::Config(format!("path must be identity or direct, not '{v}'")))
}

fn table_csv(t: &CoefficientTable) -> Result<String> {
    let mut buf = Vec::new();
    t.write_csv(&mut buf)?;
    Ok(String::from_utf8(buf).expect("ascii"))
}

/// Table from the `table` key, or estimated with the coefficient keys.
fn table_or_estimate(cfg: &RunConfig, s: &MolecularSystem, rc: ReactionCoordinate, beta: f64) -> Result<CoefficientTable> {
    if let Some(p) = cfg.get("table") {
        let t = load_table(p)?;
        if t.rc != rc.name() {
            return cfg_err(format!("{p} is a table for rc {}, not {}", t.rc, rc.name()));
        }
        if (t.beta - beta).abs() > 1e-12 * beta {
            return cfg_err(format!("{p} was estimated at beta = {}, not {beta}", t.beta));
        }
        return Ok(t);
    }
    let c = CoefficientConfig::default();
    let traj = TrajectoryConfig { steps: cfg.u64("coef-steps")?, seed: cfg.u64("seed")?, ..c.traj };
    let name = if cfg.command.ends_with("residence") { "coef-realizations" } else { "realizations" };
    let cc = coefficient_config(cfg, s, rc, traj, name)?;
    eprintln!("estimating coefficients ({} x {} steps)", cc.realizations, cc.traj.steps);
    estimate_coefficients(s, rc, beta, &s.default_configuration(), &cc, coef_path(cfg)?)
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let s = system(cfg)?;
    let rc = rc(cfg)?;
    let q0 = start_configuration(cfg, &s)?;
    let traj = trajectory(cfg)?;
    let mut body = String::from("step,t,xi");
    for i in 0..q0.len() {
        body.push_str(&format!(",q{i}"));
    }
    body.push('\n');
    let mut n = 0usize;
    for item in simulate_overdamped(&s, cfg.f64("beta")?, &traj, &q0, 0)? {
        let (step, q) = item?;
        body.push_str(&format!("{step},{},{}", step as f64 * traj.dt, rc.value(&q)));
        for v in &q {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
        n += 1;
    }
    println!("{n} states written");
    let e = Emitter::new(cfg);
    e.write(&e.path("trajectory.csv"), &body, &[])
}

fn harvest(cfg: &RunConfig) -> Result<()> {
    let s = system(cfg)?;
    let rc = rc(cfg)?;
    let (well, _) = wells(cfg, rc)?;
    let traj = TrajectoryConfig { steps: 0, ..trajectory(cfg)? };
    let r = harvest_well_samples(&s, rc, cfg.f64("beta")?, &well, cfg.usize("count")?, &traj, &start_configuration(cfg, &s)?)?;
    let mut body = String::from("xi");
    for i in 0..s.default_configuration().len() {
        body.push_str(&format!(",q{i}"));
    }
    body.push('\n');
    for q in &r.states {
        body.push_str(&g(rc.value(q)));
        for v in q {
            body.push_str(&format!(",{v}"));
        }
        body.push('\n');
    }
    println!("{} states in {}", r.states.len(), well.describe());
    let e = Emitter::new(cfg);
    let mut extra = vec![format!("well = {}", well.describe()), format!("in-well fraction = {}", r.acceptance)];
    if cfg.flag("bounds")? {
        let k = entropy_bound_constants(&s, rc, cfg.f64("beta")?, &r.states, None)?;
        println!("|grad xi| in [{}, {}], kappa = {}", k.m, k.big_m, k.kappa);
        extra.push(format!("m = {}, M = {}, kappa = {}", k.m, k.big_m, k.kappa));
    }
    e.write(&e.path("harvest.csv"), &body, &extra)
}

fn coeffs(cfg: &RunConfig) -> Result<()> {
    let s = system(cfg)?;
    let rc = rc(cfg)?;
    let cc = coefficient_config(cfg, &s, rc, trajectory(cfg)?, "realizations")?;
    let path = coef_path(cfg)?;
    let t = estimate_coefficients(&s, rc, cfg.f64("beta")?, &start_configuration(cfg, &s)?, &cc, path)?;
    let (first, last) = t.unmasked_range().unwrap_or((0, 0));
    let mut extra = vec![format!("unmasked z in [{}, {}]", t.grid.node(first), t.grid.node(last))];
    if path == CoefPath::Direct && cc.realizations > 1 {
        let a = path_agreement(&t, cc.min_count)?;
        println!("drift paths: {} of {} bins disagree (max ratio {:.3})", a.disagreements.len(), a.bins, a.max_ratio);
        extra.push(format!("path agreement: {} of {} bins disagree", a.disagreements.len(), a.bins));
    }
    let sig = t.sigma().ok();
    if let Some(sg) = &sig {
        let (lo, hi) = sg.values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        println!("sigma in [{lo:.5}, {hi:.5}]");
    }
    println!("{} bins, unmasked z in [{}, {}]", t.grid.n, t.grid.node(first), t.grid.node(last));
    let e = Emitter::new(cfg);
    e.write(&e.path("coefficients.csv"), &table_csv(&t)?, &extra)
}

fn residence(cfg: &RunConfig) -> Result<()> {
    let s = system(cfg)?;
    let rc = rc(cfg)?;
    let beta = cfg.f64("beta")?;
    let (start, exit) = wells(cfg, rc)?;
    let seed = cfg.u64("seed")?;
    let n = cfg.usize("realizations")?;
    let kinds = cfg
        .str("dynamics")?
        .split(',')
        .map(|k| DynamicsKind::from_name(k.trim()).ok_or_else(|| Error::Config(format!("unknown dynamics '{k}'"))))
        .collect::<Result<Vec<_>>>()?;
    let rcfg = ResidenceConfig { dt: cfg.f64("dt")?, seed, step_cap: cfg.u64("step-cap")? };
    let initials = cfg.str("initials")?;
    let one_d = kinds.iter().any(|k| *k != DynamicsKind::Full);
    let table = if one_d { Some(table_or_estimate(cfg, &s, rc, beta)?) } else { None };
    // initial states: harvested from the full dynamics, or drawn from the
    // restricted 1D equilibrium (no full dynamics needed)
    let (states, z0): (Vec<Vec<f64>>, Vec<f64>) = match initials {
        "harvest" => {
            let hc = TrajectoryConfig {
                dt: cfg.f64("dt")?,
                steps: 0,
                seed,
                burn_in: cfg.u64("harvest-burn-in")?,
                thinning: cfg.u64("harvest-thinning")?,
                overflow_guard: 1e6,
            };
            let st = harvest_well_samples(&s, rc, beta, &start, n, &hc, &s.default_configuration())?.states;
            let z = st.iter().map(|q| rc.value(q)).collect();
            (st, z)
        }
        "restricted" => {
            if kinds.contains(&DynamicsKind::Full) {
                return cfg_err("initials = restricted applies to 1D dynamics only");
            }
            (vec![], table.as_ref().unwrap().sample_restricted(&start, n, seed)?)
        }
        v => return cfg_err(format!("initials must be harvest or restricted, not '{v}'")),
    };
    let mut rows = vec![];
    let mut full_mean = None;
    for kind in kinds {
        let r = if kind == DynamicsKind::Full {
            residence_times(&Dynamics::Full { system: &s, rc, beta }, Initials::Full(&states), &exit, &rcfg)?
        } else {
            let sde = make_sde(table.as_ref().unwrap(), kind)?;
            residence_times(&Dynamics::OneD { sde: &sde, kind }, Initials::OneD(&z0), &exit, &rcfg)?
        };
        if kind == DynamicsKind::Full {
            full_mean = Some(r.mean);
        }
        let ratio = full_mean.map_or(f64::NAN, |f| r.mean / f);
        println!("{:<12} tau = {:.5} ± {:.5} ({} censored)", kind.name(), r.mean, r.half_width_95, r.censored);
        rows.push(vec![kind.name().to_string(), r.n.to_string(), g(r.mean), g(r.half_width_95), r.censored.to_string(), g(ratio)]);
    }
    let e = Emitter::new(cfg);
    let extra = [format!("start = {}", start.describe()), format!("exit = {}", exit.describe())];
    e.write(&e.path("residence.csv"), &csv(&["dynamics", "n", "mean", "half_width_95", "censored", "ratio_to_full"], &rows), &extra)
}

fn kramers(cfg: &RunConfig) -> Result<()> {
    let src = cfg.str("free-energy")?;
    let (a, sigma, dw, ds) = match src {
        "w3" => {
            let t = crate::potentials::ThreeAtom::default();
            let grid = UniformGrid::new(0.8, 2.4, cfg.usize("nodes")?)?;
            (GridFunction::from_fn(grid, |th| t.w3(th).0), None, Some(t.theta_saddle + t.delta_theta), Some(t.theta_saddle))
        }
        "torsion" => {
            let b = crate::potentials::Butane::default();
            let n = cfg.usize("nodes")?;
            let grid = UniformGrid::with_step(-PI, 2.0 * PI / n as f64, n);
            (GridFunction::new(grid, grid.nodes().iter().map(|&p| b.torsion(p).0).collect(), true)?, None, Some(0.0), None)
        }
        file => {
            let t = load_table(file)?;
            if cfg.flag("rescale")? {
                let (h, tt) = rescale_by_sigma(&t)?;
                // well and saddle are given in z; map them to h
                let map = |z: f64| h.eval(z);
                let (w, sp) = (cfg.f64("z-well")?, cfg.f64("z-sp")?);
                let k = kramers_time(&tt.free_energy()?, map(w), map(sp), None)?;
                return report_kramers(cfg, &k);
            }
            let sg = if cfg.flag("sigma")? { Some(t.sigma()?) } else { None };
            (t.free_energy()?, sg, None, None)
        }
    };
    let z_well = cfg.opt_f64("z-well")?.or(dw).ok_or_else(|| Error::Config("z-well is required".into()))?;
    let z_sp = cfg.opt_f64("z-sp")?.or(ds).ok_or_else(|| Error::Config("z-sp is required".into()))?;
    let k = kramers_time(&a, z_well, z_sp, sigma.as_ref())?;
    report_kramers(cfg, &k)
}

fn report_kramers(cfg: &RunConfig, k: &crate::cg_dynamics::KramersEstimate) -> Result<()> {
    let o = |v: Option<f64>| v.map_or(String::new(), g);
    println!("dA = {}, omega_sp = {}, omega_well = {}, tau0 = {}", k.delta_a, k.omega_sp, k.omega_well, k.tau0);
    let rows: Vec<Vec<String>> = cfg
        .values("beta")?
        .into_iter()
        .map(|b| {
            vec![g(b), g(k.predict(b)), g(k.delta_a), g(k.omega_sp), g(k.omega_well), g(k.tau0), g(k.z_well), g(k.z_sp), o(k.sigma_well), o(k.sigma_sp)]
        })
        .collect();
    let e = Emitter::new(cfg);
    let header = ["beta", "tau", "delta_a", "omega_sp", "omega_well", "tau0", "z_well", "z_sp", "sigma_well", "sigma_sp"];
    e.write(&e.path("kramers.csv"), &csv(&header, &rows), &[])
}

fn fit(cfg: &RunConfig) -> Result<()> {
    let mut pts = vec![];
    if let Some(p) = cfg.get("points") {
        for item in p.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let v: Vec<f64> = item.split(':').map(|x| parse_f64(x).ok_or_else(|| Error::Config(format!("points: bad number in '{item}'")))).collect::<Result<_>>()?;
            match v.as_slice() {
                [b, t] => pts.push((*b, *t, 0.0)),
                [b, t, h] => pts.push((*b, *t, h / stats::Z95)),
                _ => return cfg_err(format!("points: expected beta:tau[:half_width], got '{item}'")),
            }
        }
    }
    if let Some(path) = cfg.get("input") {
        let text = read(path)?;
        let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.trim().is_empty());
        let header: Vec<&str> = lines.next().unwrap_or("").split(',').map(str::trim).collect();
        let col = |n: &str| header.iter().position(|h| *h == n);
        let (Some(ib), Some(it)) = (col("beta"), col("tau").or(col("mean"))) else {
            return cfg_err(format!("{path} needs columns beta and tau (or mean)"));
        };
        let ih = col("half_width_95");
        for l in lines {
            let f: Vec<&str> = l.split(',').collect();
            let num = |i: usize| f.get(i).and_then(|v| parse_f64(v)).ok_or_else(|| Error::Config(format!("{path}: bad row '{l}'")));
            let h = match ih {
                Some(i) => num(i)? / stats::Z95,
                None => 0.0,
            };
            pts.push((num(ib)?, num(it)?, h));
        }
    }
    let f = fit_arrhenius(&pts)?;
    println!("tau0 = {} (se ln {}), s = {} (se {})", f.tau0, f.se_ln_tau0, f.s, f.se_s);
    let rows: Vec<Vec<String>> = pts.iter().zip(&f.residuals).map(|(p, r)| vec![g(p.0), g(p.1), g(p.2), g(*r)]).collect();
    let e = Emitter::new(cfg);
    let extra = [format!("tau0 = {}, se(ln tau0) = {}", f.tau0, f.se_ln_tau0), format!("s = {}, se(s) = {}", f.s, f.se_s)];
    e.write(&e.path("arrhenius.csv"), &csv(&["beta", "tau", "tau_se", "residual"], &rows), &extra)
}

/// Parses `gaussian:m:s`, `uniform` or `point:z` into an initial density.
fn initial_density(spec: &str, grid: UniformGrid, periodic: bool) -> Result<DensityGrid> {
    let p: Vec<&str> = spec.split(':').collect();
    let num = |s: &str| parse_f64(s).ok_or_else(|| Error::Config(format!("init '{spec}': bad number")));
    match p.as_slice() {
        ["gaussian", m, s] => {
            let (m, s) = (num(m)?, num(s)?);
            DensityGrid::from_fn(grid, periodic, |z| (-0.5 * ((z - m) / s).powi(2)).exp())
        }
        ["uniform"] => DensityGrid::from_fn(grid, periodic, |_| 1.0),
        ["point", z] => {
            let z = num(z)?;
            let i = ((z - grid.lo) / grid.step).round().clamp(0.0, (grid.n - 1) as f64) as usize;
            DensityGrid::from_fn(grid, periodic, |x| if (x - grid.node(i)).abs() < 0.5 * grid.step { 1.0 } else { 0.0 })
        }
        _ => cfg_err(format!("init '{spec}': expected gaussian:m:s, uniform or point:z")),
    }
}

fn fp(cfg: &RunConfig) -> Result<()> {
    let beta = cfg.f64("beta")?;
    let model = cfg.str("model")?;
    let (sde, grid, periodic, a): (Sde1d, UniformGrid, bool, Vec<f64>) = match model {
        "ou" | "double-well" => {
            let grid = UniformGrid::new(cfg.f64("lo")?, cfg.f64("hi")?, cfg.usize("nodes")?)?;
            let (v, dv): (fn(f64) -> f64, fn(f64) -> f64) = if model == "ou" {
                (|z| 0.5 * z * z, |z| z)
            } else {
                (|z| (z * z - 1.0).powi(2), |z| 4.0 * z * (z * z - 1.0))
            };
            let drift = GridFunction::from_fn(grid, |z| -dv(z));
            let sde = Sde1d::new(Coef::Grid(drift), Coef::Const(1.0), beta, Domain::Reflect { lo: grid.lo, hi: grid.hi() })?;
            (sde, grid, false, grid.nodes().into_iter().map(v).collect())
        }
        "table" => {
            let t = load_table(cfg.str("table")?)?;
            let kind = DynamicsKind::from_name(cfg.str("kind")?).filter(|k| *k != DynamicsKind::Full).ok_or_else(|| Error::Config("kind must be effective or free-energy".into()))?;
            let af = t.free_energy()?;
            (make_sde(&t, kind)?, af.grid, t.periodic, af.values)
        }
        v => return cfg_err(format!("model must be ou, double-well or table, not '{v}'")),
    };
    let init = initial_density(cfg.str("init")?, grid, periodic)?;
    let eq = DensityGrid::boltzmann(grid, periodic, &a, sde.beta)?;
    let traj = solve_fp(&sde, &init, cfg.f64("dt")?, cfg.f64("t-final")?, cfg.usize("record-every")?)?;
    let mut rows = vec![];
    for (t, d) in traj.times.iter().zip(&traj.densities) {
        rows.push(vec![g(*t), g(d.mass()), g(d.mean()), g(d.variance()), g(relative_entropy(d, &eq)?), g(total_variation(d, &eq)?)]);
    }
    let last = traj.densities.last().unwrap();
    println!("t = {}: relative entropy {}, TV {}; max mass error {}", traj.times.last().unwrap(), relative_entropy(last, &eq)?, total_variation(last, &eq)?, traj.max_mass_error);
    let e = Emitter::new(cfg);
    let path = e.path("fp.csv");
    let extra = [format!("max mass error = {}", traj.max_mass_error), format!("max per-step mass change = {}", traj.max_step_mass_change)];
    e.write(&path, &csv(&["t", "mass", "mean", "variance", "relative_entropy", "tv"], &rows), &extra)?;
    if cfg.flag("dump-densities")? {
        let mut body = String::from("t,z,density,equilibrium\n");
        for (t, d) in traj.times.iter().zip(&traj.densities) {
            for i in 0..grid.n {
                body.push_str(&format!("{t},{},{},{}\n", grid.node(i), d.values[i], eq.values[i]));
            }
        }
        let p = Emitter::sibling(&path, "densities");
        std::fs::write(&p, cfg.header() + &body)?;
    }
    Ok(())
}

fn check(cfg: &RunConfig) -> Result<()> {
    let s = system(cfg)?;
    let rc = rc(cfg)?;
    let beta = cfg.f64("beta")?;
    let table = table_or_estimate(cfg, &s, rc, beta)?;
    let sc = StationarityConfig { traj: trajectory(cfg)?, fp_dt: cfg.f64("fp-dt")?, fp_t_final: cfg.f64("fp-t-final")? };
    let r = marginal_stationarity_check(&s, rc, &table, &start_configuration(cfg, &s)?, &sc)?;
    for (name, tv) in &r.pairs {
        println!("{name}: TV = {tv:.5}");
    }
    let rows: Vec<Vec<String>> = (0..r.histogram.grid.n)
        .map(|i| vec![g(r.histogram.grid.node(i)), g(r.histogram.values[i]), g(r.fp_limit.values[i]), g(r.boltzmann.values[i])])
        .collect();
    let extra: Vec<String> = r.pairs.iter().map(|(n, tv)| format!("TV {n} = {tv}")).collect();
    let e = Emitter::new(cfg);
    e.write(&e.path("stationarity.csv"), &csv(&["z", "histogram", "fp_limit", "boltzmann"], &rows), &extra)
}

pub(crate) fn leaves() -> Vec<Leaf> {
    let sys = || with(system_keys(), output());
    let q0 = || key("q0", "", "initial configuration, comma separated");
    let wells = || vec![key("start", "", "starting well: above:T, below:T or near:C1|C2:R"), key("exit", "", "exit set, same syntax")];
    vec![
        Leaf {
            name: "simulate",
            about: "overdamped Langevin trajectory of a molecular system",
            keys: with(with(sys(), traj_keys("1e5", "0", "100")), vec![q0()]),
            run: simulate,
        },
        Leaf {
            name: "harvest",
            about: "equilibrium states inside a well",
            keys: with(
                with(sys(), traj_keys("0", "1e5", "1000")),
                with(wells(), vec![q0(), key("count", "100", "states to collect"), key("bounds", "no", "report gradient constants over the states (yes/no)")]),
            ),
            run: harvest,
        },
        Leaf {
            name: "coeffs",
            about: "free energy, drift and diffusion tables along the reaction coordinate",
            keys: with(with(with(sys(), traj_keys("2e6", "1e4", "10")), coef_keys("realizations")), vec![q0()]),
            run: coeffs,
        },
        Leaf {
            name: "residence",
            about: "mean residence times of full, effective and free-energy dynamics",
            keys: with(
                with(sys(), coef_keys("coef-realizations")),
                with(
                    wells(),
                    vec![
                        key("table", "", "coefficient table from coeffs (estimated when absent)"),
                        key("coef-steps", "2e6", "steps per realization when estimating the table"),
                        key("dynamics", "full,effective,free-energy", "dynamics to run"),
                        key("realizations", "1000", "initial states"),
                        key("initials", "harvest", "harvest (full dynamics) or restricted (1D equilibrium)"),
                        key("harvest-burn-in", "1e5", "burn-in before harvesting"),
                        key("harvest-thinning", "1000", "stride between harvested states"),
                        key("dt", "1e-3", "time step"),
                        key("seed", "0", "seed (CG_SEED overrides)"),
                        key("step-cap", "1e9", "censor realizations after this many steps"),
                    ],
                ),
            ),
            run: residence,
        },
        Leaf {
            name: "kramers",
            about: "large-deviation residence time from a free-energy profile",
            keys: with(
                output(),
                vec![
                    key("free-energy", "w3", "w3, torsion or a coefficient table file"),
                    key("beta", "1", "inverse temperatures for the prediction, list or lo:hi:n"),
                    key("nodes", "1601", "nodes of analytic profiles"),
                    key("z-well", "", "well position"),
                    key("z-sp", "", "saddle position"),
                    key("sigma", "no", "report sigma at well and saddle (tables only)"),
                    key("rescale", "no", "change variables so that sigma = 1 (tables only)"),
                ],
            ),
            run: kramers,
        },
        Leaf {
            name: "fit",
            about: "Arrhenius fit ln tau = ln tau0 + s beta",
            keys: with(
                output(),
                vec![key("points", "", "beta:tau[:half_width],..."), key("input", "", "CSV with columns beta, tau or mean, optional half_width_95")],
            ),
            run: fit,
        },
        Leaf {
            name: "fp",
            about: "Fokker-Planck evolution of a 1D density",
            keys: with(
                output(),
                vec![
                    key("model", "double-well", "ou, double-well or table"),
                    key("table", "", "coefficient table (model = table)"),
                    key("kind", "effective", "effective or free-energy (model = table)"),
                    key("beta", "1", "inverse temperature (analytic models)"),
                    key("lo", "-3", "grid start (analytic models)"),
                    key("hi", "3", "grid end (analytic models)"),
                    key("nodes", "301", "grid nodes (analytic models)"),
                    key("init", "gaussian:1:0.2", "gaussian:m:s, uniform or point:z"),
                    key("dt", "1e-3", "time step"),
                    key("t-final", "10", "final time"),
                    key("record-every", "100", "steps between recorded densities"),
                    key("dump-densities", "no", "also write every recorded density (yes/no)"),
                ],
            ),
            run: fp,
        },
        Leaf {
            name: "check",
            about: "histogram, Fokker-Planck limit and Boltzmann density of the coordinate",
            keys: with(
                with(with(sys(), traj_keys("5e6", "1e4", "10")), coef_keys("realizations")),
                vec![
                    q0(),
                    key("table", "", "coefficient table from coeffs (estimated when absent)"),
                    key("coef-steps", "2e6", "steps per realization when estimating the table"),
                    key("fp-dt", "1e-3", "Fokker-Planck time step"),
                    key("fp-t-final", "20", "Fokker-Planck final time"),
                ],
            ),
            run: check,
        },
    ]
}
