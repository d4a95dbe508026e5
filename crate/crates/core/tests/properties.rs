use cgcore::cg_dynamics::fit_arrhenius;
use cgcore::cli::{parse_config_text, svg_from_csv};
use cgcore::fp1d::{relative_entropy, total_variation, DensityGrid};
use cgcore::grid::{GridFunction, UniformGrid};
use cgcore::potentials::wrap_angle;
use cgcore::rng::Stream;
use cgcore::sde::{Coef, Domain, Region, Sde1d};
use proptest::prelude::*;
use std::f64::consts::PI;

fn density(v: &[f64]) -> DensityGrid {
    DensityGrid::new(UniformGrid::new(0.0, 1.0, v.len()).unwrap(), v.to_vec(), false).unwrap()
}

proptest! {
    #[test]
    fn interpolation_is_exact_at_nodes_and_bounded_between(
        v in prop::collection::vec(-10.0f64..10.0, 3..40),
        t in 0.0f64..1.0,
    ) {
        let g = UniformGrid::new(-1.0, 2.0, v.len()).unwrap();
        let f = GridFunction::new(g, v.clone(), false).unwrap();
        for (i, y) in v.iter().enumerate() {
            prop_assert!((f.eval(g.node(i)) - y).abs() < 1e-9);
        }
        let i = ((v.len() - 2) as f64 * t) as usize;
        let z = g.node(i) + 0.37 * g.step;
        let (lo, hi) = (v[i].min(v[i + 1]), v[i].max(v[i + 1]));
        prop_assert!(f.eval(z) >= lo - 1e-9 && f.eval(z) <= hi + 1e-9);
    }

    #[test]
    fn distances_between_densities(
        a in prop::collection::vec(0.01f64..5.0, 5..30),
        seed in 0u64..1000,
    ) {
        let mut r = Stream::new(seed, 0);
        let b: Vec<f64> = a.iter().map(|_| 0.01 + 5.0 * r.uniform()).collect();
        let (p, q) = (density(&a), density(&b));
        let tv = total_variation(&p, &q).unwrap();
        prop_assert!((tv - total_variation(&q, &p).unwrap()).abs() < 1e-12);
        // L1 distance of two probability densities
        prop_assert!((0.0..=2.0 + 1e-12).contains(&tv));
        prop_assert!(total_variation(&p, &p).unwrap() < 1e-12);
        // Csiszar-Kullback: ||p - q||_1 <= sqrt(2 H(p|q))
        let h = relative_entropy(&p, &q).unwrap();
        prop_assert!(h >= -1e-12 && tv <= (2.0 * h).sqrt() + 1e-9);
    }

    #[test]
    fn one_dimensional_steps_stay_in_the_domain(
        z in -5.0f64..5.0,
        b in -50.0f64..50.0,
        seed in 0u64..1000,
        periodic in any::<bool>(),
    ) {
        let domain = if periodic { Domain::Periodic { lo: -PI, period: 2.0 * PI } } else { Domain::Reflect { lo: -1.0, hi: 2.0 } };
        let sde = Sde1d::new(Coef::Const(b), Coef::Const(3.0), 1.0, domain).unwrap();
        let st = sde.stepper(0.05);
        let mut rng = Stream::new(seed, 1);
        let mut x = match domain { Domain::Reflect { .. } => z.clamp(-1.0, 2.0), _ => wrap_angle(z) };
        for _ in 0..50 {
            x = st.advance(x, &mut rng);
            match domain {
                Domain::Reflect { lo, hi } => prop_assert!(x >= lo && x <= hi),
                Domain::Periodic { lo, period } => prop_assert!(x >= lo && x < lo + period),
                Domain::Line => unreachable!(),
            }
        }
    }

    #[test]
    fn angular_regions_are_periodic(c in -PI..PI, r in 0.01f64..1.0, x in -PI..PI, k in -3i32..3) {
        let reg = Region::NearAngles { centres: vec![c], radius: r };
        prop_assert_eq!(reg.contains(x), reg.contains(x + 2.0 * PI * k as f64));
    }

    #[test]
    fn region_syntax_round_trips(t in -100.0f64..100.0) {
        prop_assert_eq!(Region::parse(&format!("above:{t}")).unwrap(), Region::Above(t));
        prop_assert_eq!(Region::parse(&format!("below:{t}")).unwrap(), Region::Below(t));
    }

    #[test]
    fn config_lines_round_trip(
        pairs in prop::collection::vec(("[a-z][a-z0-9-]{0,10}", "[A-Za-z0-9.:,+-]{1,12}"), 0..10),
    ) {
        let text: String = pairs.iter().map(|(k, v)| format!("  {k} =  {v}\n# comment\n\n")).collect();
        let parsed = parse_config_text(&text).unwrap();
        prop_assert_eq!(parsed, pairs);
    }

    #[test]
    fn svg_carries_every_point(ys in prop::collection::vec(-1e3f64..1e3, 2..50)) {
        let mut csv = String::from("x,y\n");
        for (i, y) in ys.iter().enumerate() {
            csv.push_str(&format!("{i},{y}\n"));
        }
        let svg = svg_from_csv(&csv, None, None).unwrap();
        for (i, y) in ys.iter().enumerate() {
            let needle = format!("{i},{y}");
            prop_assert!(svg.contains(&needle));
        }
    }

    #[test]
    fn arrhenius_recovers_exact_lines(ln_tau0 in -5.0f64..2.0, s in 0.1f64..5.0, n in 2usize..8) {
        let pts: Vec<(f64, f64, f64)> = (0..n).map(|i| {
            let beta = 0.5 + i as f64 * 0.7;
            (beta, (ln_tau0 + s * beta).exp(), 0.0)
        }).collect();
        let f = fit_arrhenius(&pts).unwrap();
        prop_assert!((f.s - s).abs() < 1e-8 && (f.tau0.ln() - ln_tau0).abs() < 1e-8);
    }
}
