use super::config::key;
use super::output::csv;
use super::{Emitter, Key, Leaf, RunConfig};
use crate::chain_mc::{ChainMcConfig, ForceEstimator};
use crate::chain_nn::{self, ChainModelNN, Quadrature, QuadratureSpec};
use crate::chain_nnn::{self, ChainModelNNN, VarianceConfig};
use crate::error::{Error, Result};
use crate::grid::UniformGrid;
use crate::potentials::PairPotential;
use crate::sde::{Sampler, TrajectoryConfig};
use crate::transfer_operator::{boundedness_ratio, log_lambda_curve, YGrid};

fn common() -> Vec<Key> {
    vec![
        key("beta", "1", "inverse temperature"),
        key("out", "", "output CSV path"),
        key("svg", "no", "also write an SVG plot (yes/no)"),
        key("svg-x", "", "column for the SVG x axis"),
        key("svg-y", "", "column for the SVG y axis"),
        key("workers", "", "worker threads"),
    ]
}

fn mc_keys() -> Vec<Key> {
    vec![
        key("n", "100", "chain length N (list allowed)"),
        key("dt", "1e-3", "time step"),
        key("steps", "2e5", "production steps per realization"),
        key("burn-in", "2e4", "discarded steps per realization"),
        key("thinning", "10", "observation stride"),
        key("realizations", "40", "independent realizations"),
        key("seed", "0", "master seed (CG_SEED overrides)"),
        key("sampler", "mala", "mala or euler-maruyama"),
        key("estimator", "cut-average", "cut-average or end-cut"),
        key("overflow-guard", "1e6", "abort when a coordinate exceeds this"),
    ]
}

fn with(mut base: Vec<Key>, extra: Vec<Key>) -> Vec<Key> {
    base.extend(extra);
    base
}

fn pair(cfg: &RunConfig, name: &str) -> Result<PairPotential> {
    let v = cfg.str(name)?;
    PairPotential::parse(v).ok_or_else(|| Error::Config(format!("unknown potential '{v}'")))
}

fn quadrature(cfg: &RunConfig) -> Result<Quadrature> {
    let n = cfg.usize("quad-n")?;
    match (cfg.opt_f64("quad-lo")?, cfg.opt_f64("quad-hi")?) {
        (Some(lo), Some(hi)) => Ok(Quadrature::Fixed(QuadratureSpec { lo, hi, n })),
        (None, None) => Ok(Quadrature::Auto { n }),
        _ => Err(Error::Config("quad-lo and quad-hi must be given together".into())),
    }
}

fn mc_config(cfg: &RunConfig) -> Result<ChainMcConfig> {
    let sampler = Sampler::from_name(cfg.str("sampler")?).ok_or_else(|| Error::Config("sampler must be mala or euler-maruyama".into()))?;
    let estimator = match cfg.str("estimator")? {
        "cut-average" => ForceEstimator::CutAverage,
        "end-cut" => ForceEstimator::EndCut,
        v => return Err(Error::Config(format!("unknown estimator '{v}'"))),
    };
    Ok(ChainMcConfig {
        traj: TrajectoryConfig {
            dt: cfg.f64("dt")?,
            steps: cfg.u64("steps")?,
            seed: cfg.u64("seed")?,
            burn_in: cfg.u64("burn-in")?,
            thinning: cfg.u64("thinning")?,
            overflow_guard: cfg.f64("overflow-guard")?,
        },
        realizations: cfg.usize("realizations")?,
        estimator,
        sampler,
    })
}

fn lengths(cfg: &RunConfig) -> Result<Vec<usize>> {
    cfg.values("n")?
        .into_iter()
        .map(|v| if v >= 1.0 && v.fract() == 0.0 { Ok(v as usize) } else { Err(Error::Config(format!("chain length {v} is not a positive integer"))) })
        .collect()
}

fn g(v: f64) -> String {
    format!("{v}")
}

fn nn_model(cfg: &RunConfig) -> Result<ChainModelNN> {
    ChainModelNN::new(pair(cfg, "potential")?, cfg.f64("beta")?)
}

fn nn_stress(cfg: &RunConfig) -> Result<()> {
    let m = nn_model(cfg)?;
    let q = quadrature(cfg)?;
    let mut rows = vec![];
    for f in cfg.values("f")? {
        let y = chain_nn::strain_for_stress_nn(&m, f, &q)?;
        println!("f = {f}: y* = {y}");
        rows.push(vec![g(f), g(y)]);
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nn_stress.csv"), &csv(&["f", "y_star"], &rows), &[])
}

fn nn_force(cfg: &RunConfig) -> Result<()> {
    let m = nn_model(cfg)?;
    let q = quadrature(cfg)?;
    let mut rows = vec![];
    for x in cfg.values("x")? {
        let r = chain_nn::free_energy_limit_nn(&m, x, &q)?;
        println!("x = {x}: F_inf' = {}", r.f_inf_prime);
        rows.push(vec![g(x), g(r.f_inf), g(r.f_inf_prime), g(r.xi_star)]);
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nn_force.csv"), &csv(&["x", "F_inf", "F_inf_prime", "xi_star"], &rows), &[])
}

fn nn_reference(cfg: &RunConfig) -> Result<()> {
    let m = nn_model(cfg)?;
    let mc = mc_config(cfg)?;
    let e = Emitter::new(cfg);
    if let Some(f) = cfg.opt_f64("pulled-force")? {
        let n = *lengths(cfg)?.first().unwrap();
        let per = chain_nn::reference_bond_forces_nn_neumann(&m, f, n, &mc)?;
        let rows: Vec<Vec<String>> = per.iter().enumerate().map(|(j, (v, h))| vec![(j + 1).to_string(), g(*v), g(*h)]).collect();
        println!("pulled chain, N = {n}, f = {f}: bond forces written");
        return e.write(&e.path("nn_bond_forces.csv"), &csv(&["bond", "force", "half_width_95"], &rows), &[]);
    }
    let x = cfg.f64("x")?;
    let mut rows = vec![];
    for n in lengths(cfg)? {
        let r = chain_nn::reference_force_mc_nn(&m, x, n, &mc)?;
        println!("N = {n}: F_N'({x}) = {} ± {}", r.estimate, r.half_width_95);
        rows.push(vec![n.to_string(), g(r.estimate), g(r.half_width_95)]);
    }
    e.write(&e.path("nn_reference.csv"), &csv(&["N", "estimate", "half_width_95"], &rows), &[])
}

pub(crate) fn nn_leaves() -> Vec<Leaf> {
    let nn = || {
        with(
            common(),
            vec![
                key("potential", "paper-quartic-W1", "pair potential W"),
                key("quad-n", "4001", "Simpson nodes"),
                key("quad-lo", "", "fixed quadrature window start"),
                key("quad-hi", "", "fixed quadrature window end"),
            ],
        )
    };
    vec![
        Leaf { name: "stress", about: "strain y*(f) for prescribed stresses", keys: with(nn(), vec![key("f", "0", "stress, list or lo:hi:n")]), run: nn_stress },
        Leaf {
            name: "force",
            about: "thermodynamic-limit free energy and force at prescribed strains",
            keys: with(nn(), vec![key("x", "1.4", "strain, list or lo:hi:n")]),
            run: nn_force,
        },
        Leaf {
            name: "reference",
            about: "finite-N Monte Carlo mean force",
            keys: with(
                with(nn(), mc_keys()),
                vec![key("x", "1.4", "strain"), key("pulled-force", "", "free end pulled by this force: per-bond forces instead")],
            ),
            run: nn_reference,
        },
    ]
}

fn nnn_model(cfg: &RunConfig) -> Result<ChainModelNNN> {
    ChainModelNNN::new(pair(cfg, "w1")?, pair(cfg, "w2")?, cfg.f64("beta")?)
}

fn y_grid(cfg: &RunConfig) -> Result<YGrid> {
    Ok(YGrid::Auto { n: cfg.usize("y-n")? })
}

fn xi_grid(cfg: &RunConfig) -> Result<UniformGrid> {
    UniformGrid::new(cfg.f64("xi-lo")?, cfg.f64("xi-hi")?, cfg.usize("xi-n")?)
}

fn nnn_stress(cfg: &RunConfig) -> Result<()> {
    let m = nnn_model(cfg)?;
    let mut rows = vec![];
    for f in cfg.values("f")? {
        let y = chain_nnn::strain_for_stress_nnn(&m, f, y_grid(cfg)?)?;
        println!("f = {f}: y* = {y}");
        rows.push(vec![g(f), g(y)]);
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nnn_stress.csv"), &csv(&["f", "y_star"], &rows), &[])
}

fn nnn_force(cfg: &RunConfig) -> Result<()> {
    let m = nnn_model(cfg)?;
    let table = log_lambda_curve(&m.w1, &m.w2, m.beta, xi_grid(cfg)?, y_grid(cfg)?)?;
    let mut rows = vec![];
    for x in cfg.values("x")? {
        let r = chain_nnn::free_energy_limit_nnn(&m, x, &table)?;
        println!("x = {x}: F_inf' = {}", r.f_inf_prime);
        rows.push(vec![g(x), g(r.f_inf_prime), g(r.xi_star)]);
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nnn_force.csv"), &csv(&["x", "F_inf_prime", "xi_star"], &rows), &[])
}

fn nnn_variance(cfg: &RunConfig) -> Result<()> {
    let m = nnn_model(cfg)?;
    let vc = VarianceConfig { seed: cfg.u64("seed")?, y: y_grid(cfg)?, batch_len: cfg.usize("batch-len")? };
    let mut rows = vec![];
    for f in cfg.values("f")? {
        let r = chain_nnn::asymptotic_variance_nnn(&m, f, cfg.usize("samples")?, &vc)?;
        println!("f = {f}: sigma^2 = {} ± {}", r.sigma2, r.half_width_95);
        rows.push(vec![g(f), g(r.sigma2), g(r.half_width_95)]);
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nnn_variance.csv"), &csv(&["f", "sigma2", "half_width_95"], &rows), &[])
}

fn nnn_reference(cfg: &RunConfig) -> Result<()> {
    let m = nnn_model(cfg)?;
    let mc = mc_config(cfg)?;
    let x = cfg.f64("x")?;
    let mut rows = vec![];
    for n in lengths(cfg)? {
        let r = chain_nnn::reference_force_mc_nnn(&m, x, n, &mc)?;
        println!("N = {n}: F_N'({x}) = {} ± {}", r.estimate, r.half_width_95);
        rows.push(vec![n.to_string(), g(r.estimate), g(r.half_width_95)]);
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nnn_reference.csv"), &csv(&["N", "estimate", "half_width_95"], &rows), &[])
}

fn nnn_zero_t(cfg: &RunConfig) -> Result<()> {
    let m = nnn_model(cfg)?;
    let ns: Vec<Option<usize>> = if cfg.get("n").is_some() { lengths(cfg)?.into_iter().map(Some).collect() } else { vec![None] };
    let mut rows = vec![];
    for x in cfg.values("x")? {
        for &n in &ns {
            let z = chain_nnn::zero_temperature(&m, x, n)?;
            if z.convexity_warning {
                eprintln!("warning: W1 or phi is not strictly convex at x = {x}");
            }
            let (nn, j, ub) = match (n, &z.j_n) {
                (Some(n), Some((j, _))) => (n.to_string(), g(*j), g(m.w1.value(x) + (n - 1) as f64 / n as f64 * m.w2.value(2.0 * x))),
                _ => (String::new(), String::new(), String::new()),
            };
            println!("x = {x}: phi = {}, phi' = {}{}", z.phi, z.phi_prime, if j.is_empty() { String::new() } else { format!(", J_{nn} = {j}") });
            rows.push(vec![g(x), g(z.phi), g(z.phi_prime), nn, j, ub]);
        }
    }
    let e = Emitter::new(cfg);
    e.write(&e.path("nnn_zero_t.csv"), &csv(&["x", "phi", "phi_prime", "N", "J_N", "upper_bound"], &rows), &[])
}

fn nnn_spectrum(cfg: &RunConfig) -> Result<()> {
    let m = nnn_model(cfg)?;
    let t = log_lambda_curve(&m.w1, &m.w2, m.beta, xi_grid(cfg)?, y_grid(cfg)?)?;
    let big = t.log_big_lambda();
    let rows: Vec<Vec<String>> = (0..t.xi.n).map(|i| vec![g(t.xi.node(i)), g(t.log_lambda[i]), g(big[i]), g(t.mean[i])]).collect();
    let e = Emitter::new(cfg);
    let path = e.path("nnn_spectrum.csv");
    let (r_min, r_max) = boundedness_ratio(&m.w1, &m.w2, m.beta, t.y)?;
    let extra = [
        format!("ln lambda_0 = {}", t.log_lambda0),
        format!("y grid = [{}, {}] with {} nodes", t.y.lo, t.y.hi(), t.y.n),
        format!("exp(-beta W1/2) / psi_0 on the grid: min {r_min}, max {r_max}"),
    ];
    e.write(&path, &csv(&["xi", "log_lambda", "log_Lambda", "mean"], &rows), &extra)?;
    println!("{} tilts, ln lambda_0 = {}", t.xi.n, t.log_lambda0);
    if cfg.flag("dump-psi")? {
        let ys = t.y.nodes();
        let mut body = String::from("xi,y,psi\n");
        for i in 0..t.xi.n {
            for (y, p) in ys.iter().zip(t.psi_at(i)) {
                body.push_str(&format!("{},{y},{p}\n", t.xi.node(i)));
            }
        }
        let p = Emitter::sibling(&path, "psi");
        std::fs::write(&p, cfg.header() + &body).map_err(|e| Error::Config(format!("cannot write {}: {e}", p.display())))?;
    }
    Ok(())
}

pub(crate) fn nnn_leaves() -> Vec<Leaf> {
    let nnn = || {
        with(
            common(),
            vec![
                key("w1", "paper-quartic-W1", "nearest-neighbour potential"),
                key("w2", "paper-quartic-W2", "next-to-nearest-neighbour potential"),
                key("y-n", "400", "kernel grid nodes"),
            ],
        )
    };
    let xi = |lo: &'static str, hi: &'static str, n: &'static str| {
        vec![key("xi-lo", lo, "first tilt"), key("xi-hi", hi, "last tilt"), key("xi-n", n, "number of tilts")]
    };
    vec![
        Leaf { name: "stress", about: "strain y*(f) from the leading eigenfunction", keys: with(nnn(), vec![key("f", "0", "stress, list or lo:hi:n")]), run: nnn_stress },
        Leaf {
            name: "force",
            about: "thermodynamic-limit force by Legendre transform of ln lambda",
            keys: with(with(nnn(), xi("-12", "30", "841")), vec![key("x", "1.4", "strain, list or lo:hi:n")]),
            run: nnn_force,
        },
        Leaf {
            name: "variance",
            about: "asymptotic variance of the strain under stress f",
            keys: with(
                nnn(),
                vec![
                    key("f", "0", "stress, list or lo:hi:n"),
                    key("samples", "1e6", "Markov chain steps"),
                    key("batch-len", "100", "batch length"),
                    key("seed", "0", "seed (CG_SEED overrides)"),
                ],
            ),
            run: nnn_variance,
        },
        Leaf { name: "reference", about: "finite-N Monte Carlo mean force", keys: with(with(nnn(), mc_keys()), vec![key("x", "1.4", "strain")]), run: nnn_reference },
        Leaf {
            name: "zero-t",
            about: "zero-temperature limit phi and finite-N minimum J_N",
            keys: with(nnn(), vec![key("x", "1.4", "strain, list or lo:hi:n"), key("n", "", "chain length N (list allowed)")]),
            run: nnn_zero_t,
        },
        Leaf {
            name: "spectrum",
            about: "ln lambda(xi) of the tilted transfer operator",
            keys: with(with(nnn(), xi("-10", "10", "401")), vec![key("dump-psi", "no", "also write eigenfunctions (yes/no)")]),
            run: nnn_spectrum,
        },
    ]
}
