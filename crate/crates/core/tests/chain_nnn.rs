use cgcore::chain_mc::ChainMcConfig;
use cgcore::chain_nnn::*;
use cgcore::grid::UniformGrid;
use cgcore::potentials::PairPotential;
use cgcore::transfer_operator::{log_lambda_curve, YGrid};

mod common;
use common::n3_quadrature_oracle;

fn quartic() -> ChainModelNNN {
    ChainModelNNN::new(PairPotential::QuarticW1, PairPotential::QuarticW2, 1.0).unwrap()
}

#[test]
fn three_atom_chain_matches_quadrature_oracle() {
    let oracle = n3_quadrature_oracle(&PairPotential::QuarticW1, Some(&PairPotential::QuarticW2), 1.4);
    let mut cfg = ChainMcConfig::default();
    cfg.traj.steps = 400_000;
    cfg.traj.burn_in = 5_000;
    cfg.traj.thinning = 5;
    cfg.realizations = 20;
    let r = reference_force_mc_nnn(&quartic(), 1.4, 3, &cfg).unwrap();
    assert!((r.estimate - oracle).abs() <= r.half_width_95, "{r:?} vs {oracle}");
}

fn forces(y: YGrid, xi_n: usize) -> Vec<f64> {
    let m = quartic();
    let t = log_lambda_curve(&m.w1, &m.w2, 1.0, UniformGrid::new(-12.0, 30.0, xi_n).unwrap(), y).unwrap();
    (0..13).map(|i| free_energy_limit_nnn(&m, 0.8 + 0.1 * i as f64, &t).unwrap().f_inf_prime).collect()
}

#[test]
fn force_converges_under_grid_doubling_and_is_increasing() {
    let coarse = forces(YGrid::Auto { n: 200 }, 421);
    let fine = forces(YGrid::Auto { n: 400 }, 841);
    for (c, f) in coarse.iter().zip(&fine) {
        assert!((c - f).abs() < 1e-4 * f.abs().max(1.0), "{coarse:?} vs {fine:?}");
    }
    // F is convex, so F' increases with the strain
    assert!(fine.windows(2).all(|w| w[1] > w[0]), "{fine:?}");
}

#[test]
fn variance_is_the_response_of_the_strain() {
    // beta sigma^2(f) = d y*/d f
    let m = quartic();
    let h = 1e-3;
    let dy = (strain_for_stress_nnn(&m, 0.5 + h, YGrid::Auto { n: 400 }).unwrap() - strain_for_stress_nnn(&m, 0.5 - h, YGrid::Auto { n: 400 }).unwrap()) / (2.0 * h);
    let v = asymptotic_variance_nnn(&m, 0.5, 2_000_000, &VarianceConfig { seed: 4, ..Default::default() }).unwrap();
    assert!((v.sigma2 - dy).abs() <= v.half_width_95 + 1e-3 * dy, "{v:?} vs {dy}");
}
