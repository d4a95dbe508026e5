use cgcore::grid::{GridFunction, UniformGrid};
use cgcore::potentials::{MolecularSystem, Potential, ReactionCoordinate};
use cgcore::rng::Stream;
use cgcore::sde::*;
use cgcore::stats;
use std::f64::consts::{FRAC_PI_2, PI};

struct Harmonic {
    k: f64,
}

impl Potential for Harmonic {
    fn dof(&self) -> usize {
        1
    }
    fn energy_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        g[0] = self.k * q[0];
        0.5 * self.k * q[0] * q[0]
    }
}

#[test]
fn free_diffusion_variance() {
    let free = Harmonic { k: 0.0 };
    let beta = 2.0;
    let cfg = TrajectoryConfig { dt: 1e-2, steps: 100, seed: 5, burn_in: 0, thinning: 100, overflow_guard: 1e6 };
    let n = 20_000;
    let xs: Vec<f64> = (0..n)
        .map(|i| simulate_overdamped(&free, beta, &cfg, &[0.0], i).unwrap().last().unwrap().unwrap().1[0])
        .collect();
    let m2: Vec<f64> = xs.iter().map(|x| x * x).collect();
    let (v, hw) = stats::mean_ci(&m2);
    let t = 1.0;
    assert!((v - 2.0 * t / beta).abs() < 3.0 * hw / 1.96, "{v} +- {hw}");
}

#[test]
fn ornstein_uhlenbeck_stationary_variance() {
    let ou = Harmonic { k: 4.0 };
    let cfg = TrajectoryConfig { dt: 1e-3, steps: 20_000_000, seed: 1, burn_in: 10_000, thinning: 50, overflow_guard: 1e6 };
    let xs: Vec<f64> = simulate_overdamped(&ou, 1.0, &cfg, &[0.0], 0).unwrap().map(|r| r.unwrap().1[0].powi(2)).collect();
    let (v, hw, _) = stats::batch_means(&xs, 100);
    assert!((v - 0.25).abs() < 3.0 * hw / 1.96, "{v} +- {hw}");
}

#[test]
fn toy2d_samples_boltzmann_law() {
    let s = MolecularSystem::from_name("toy2d").unwrap();
    let cfg = TrajectoryConfig { dt: 1e-3, steps: 100_000_000, seed: 2, burn_in: 10_000, thinning: 10, overflow_guard: 1e6 };
    let (lo, hi, nb) = (-2.5, 2.5, 50);
    let h = (hi - lo) / nb as f64;
    let mut hist = vec![0.0; nb * nb];
    let mut total = 0.0;
    for r in simulate_overdamped(&s, 1.0, &cfg, &[1.0, 1.0], 0).unwrap() {
        let q = r.unwrap().1;
        let (i, j) = (((q[0] - lo) / h).floor(), ((q[1] - lo) / h).floor());
        total += 1.0;
        if i >= 0.0 && j >= 0.0 && (i as usize) < nb && (j as usize) < nb {
            hist[i as usize * nb + j as usize] += 1.0;
        }
    }
    assert!(total >= 1e7);
    // exact bin masses by a 10x10 midpoint rule inside each bin
    let mut exact = vec![0.0; nb * nb];
    let sub = 10;
    for i in 0..nb {
        for j in 0..nb {
            let mut m = 0.0;
            for a in 0..sub {
                for b in 0..sub {
                    let x = lo + (i as f64 + (a as f64 + 0.5) / sub as f64) * h;
                    let y = lo + (j as f64 + (b as f64 + 0.5) / sub as f64) * h;
                    m += (-s.energy(&[x, y])).exp();
                }
            }
            exact[i * nb + j] = m;
        }
    }
    let z: f64 = exact.iter().sum();
    let tv: f64 = hist.iter().zip(&exact).map(|(p, q)| (p / total - q / z).abs()).sum();
    assert!(tv < 0.03, "L1 distance {tv}");
}

#[test]
fn trajectories_are_reproducible() {
    let s = MolecularSystem::from_name("three-atom").unwrap();
    let cfg = TrajectoryConfig { dt: 1e-3, steps: 5000, seed: 9, burn_in: 0, thinning: 100, overflow_guard: 1e6 };
    let q0 = s.default_configuration();
    let a: Vec<_> = simulate_overdamped(&s, 1.0, &cfg, &q0, 3).unwrap().map(|r| r.unwrap()).collect();
    let b: Vec<_> = simulate_overdamped(&s, 1.0, &cfg, &q0, 3).unwrap().map(|r| r.unwrap()).collect();
    assert_eq!(a, b);
    assert_eq!(a.len(), 50);
}

#[test]
fn overflow_guard_trips() {
    let s = MolecularSystem::from_name("three-atom").unwrap();
    let cfg = TrajectoryConfig { dt: 5e-2, steps: 10_000, seed: 9, burn_in: 0, thinning: 1, overflow_guard: 1e6 };
    let r: Result<Vec<_>, _> = simulate_overdamped(&s, 1.0, &cfg, &s.default_configuration(), 0).unwrap().collect();
    assert!(r.is_err());
}

#[test]
fn deterministic_transport_limit() {
    let c = 2.0;
    let d = 3.0;
    let sde = Sde1d::new(Coef::Const(-c), Coef::Const(1e-4), 1.0, Domain::Line).unwrap();
    let z0 = vec![d; 50];
    let rep = residence_times(
        &Dynamics::OneD { sde: &sde, kind: DynamicsKind::Effective },
        Initials::OneD(&z0),
        &Region::Below(0.0),
        &ResidenceConfig::default(),
    )
    .unwrap();
    assert!((rep.mean - d / c).abs() < 0.01 * d / c);
    assert_eq!(rep.censored, 0);
}

#[test]
fn censored_runs_are_counted() {
    let sde = Sde1d::new(Coef::Const(0.0), Coef::Const(1e-6), 1.0, Domain::Line).unwrap();
    let mut z0 = vec![1.0; 5];
    z0[0] = 1e-9;
    z0[1] = 1e-9;
    let cfg = ResidenceConfig { step_cap: 1000, ..Default::default() };
    let rep = residence_times(&Dynamics::OneD { sde: &sde, kind: DynamicsKind::FreeEnergy }, Initials::OneD(&z0), &Region::Below(0.0), &cfg);
    // only two realizations can leave; the other three hit the cap
    match rep {
        Ok(r) => assert_eq!((r.n, r.censored), (2, 3)),
        Err(e) => panic!("{e}"),
    }
}

#[test]
fn harvest_respects_the_well() {
    let s = MolecularSystem::from_name("three-atom").unwrap();
    let cfg = TrajectoryConfig { dt: 1e-3, steps: 0, seed: 4, burn_in: 100_000, thinning: 100, overflow_guard: 1e6 };
    let well = Region::Above(FRAC_PI_2 + 0.15);
    let h = harvest_well_samples(&s, ReactionCoordinate::Angle, 1.0, &well, 500, &cfg, &s.default_configuration()).unwrap();
    assert_eq!(h.states.len(), 500);
    assert!(h.states.iter().all(|q| well.contains(ReactionCoordinate::Angle.value(q))));

    let b = MolecularSystem::from_name("butane").unwrap();
    let main = Region::NearAngles { centres: vec![0.0], radius: 0.5 };
    let h = harvest_well_samples(&b, ReactionCoordinate::Dihedral, 1.0, &main, 500, &cfg, &b.default_configuration()).unwrap();
    assert!(h.acceptance > 0.5, "acceptance {}", h.acceptance);
}

#[test]
fn halving_the_time_step_is_consistent() {
    // free-energy dynamics in a double well A(z) = (z^2 - 1)^2
    let g = UniformGrid::new(-2.5, 2.5, 1001).unwrap();
    let drift = GridFunction::from_fn(g, |z| -4.0 * z * (z * z - 1.0));
    let sde = Sde1d::new(Coef::Grid(drift), Coef::Const(1.0), 2.0, Domain::Reflect { lo: -2.5, hi: 2.5 }).unwrap();
    let z0 = vec![1.0; 2000];
    let run = |dt: f64| {
        residence_times(
            &Dynamics::OneD { sde: &sde, kind: DynamicsKind::FreeEnergy },
            Initials::OneD(&z0),
            &Region::Below(-0.5),
            &ResidenceConfig { dt, seed: 3, ..Default::default() },
        )
        .unwrap()
    };
    let (a, b) = (run(2e-3), run(1e-3));
    assert!((a.mean - b.mean).abs() < a.half_width_95 + b.half_width_95, "{} vs {}", a.mean, b.mean);
}

#[test]
fn wrapped_exit_test() {
    let r = Region::NearAngles { centres: vec![2.0 * PI / 3.0, -2.0 * PI / 3.0], radius: 0.5 };
    assert!(r.contains(2.2));
    assert!(r.contains(-2.5));
    assert!(!r.contains(0.3));
    assert!(!r.contains(PI));
    assert!(r.contains(-PI + 0.7));
}

#[test]
fn reflecting_and_periodic_domains() {
    let mut rng = Stream::new(0, 0);
    let sde = Sde1d::new(Coef::Const(0.0), Coef::Const(1.0), 1.0, Domain::Reflect { lo: 0.0, hi: 1.0 }).unwrap();
    let mut z = 0.5;
    for _ in 0..10_000 {
        z = sde.step(z, 0.1, &mut rng);
        assert!((0.0..=1.0).contains(&z));
    }
    let sde = Sde1d::new(Coef::Const(3.0), Coef::Const(1.0), 1.0, Domain::Periodic { lo: -PI, period: 2.0 * PI }).unwrap();
    for _ in 0..10_000 {
        z = sde.step(z, 0.1, &mut rng);
        assert!((-PI..PI).contains(&z));
    }
}
