//! Pair potentials, molecular systems and reaction coordinates.

mod geometry;
mod pair;
mod rc;
mod systems;

pub use geometry::{angle, bond, dihedral};
pub use pair::{PairEval, PairPotential};
pub(crate) use pair::golden_min;
pub use rc::{wrap_angle, ReactionCoordinate};
pub use systems::{three_atom_angle, Butane, MolecularSystem, Potential, ThreeAtom, Toy2d};

use crate::error::{Error, Result};

pub fn eval_pair(p: &PairPotential, y: f64) -> PairEval {
    p.eval(y)
}

pub fn eval_system(s: &MolecularSystem, q: &[f64]) -> Result<(f64, Vec<f64>)> {
    if q.len() != s.dof() {
        return Err(Error::InvalidParameter(format!("{} expects {} coordinates, got {}", s.name(), s.dof(), q.len())));
    }
    let mut g = vec![0.0; q.len()];
    let v = s.energy_grad(q, &mut g);
    Ok((v, g))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RcValue {
    pub xi: f64,
    pub grad: Vec<f64>,
    pub laplacian: Option<f64>,
}

/// Evaluates a reaction coordinate. Asking for the Laplacian of a coordinate
/// that has none in closed form is an error.
pub fn eval_rc(rc: ReactionCoordinate, q: &[f64], need_laplacian: bool) -> Result<RcValue> {
    if q.len() != rc.dof() {
        return Err(Error::InvalidParameter(format!("{} expects {} coordinates, got {}", rc.name(), rc.dof(), q.len())));
    }
    let mut grad = vec![0.0; q.len()];
    let xi = rc.eval(q, &mut grad);
    let laplacian = rc.laplacian(q);
    if need_laplacian && laplacian.is_none() {
        return Err(Error::InvalidParameter(format!(
            "no closed-form Laplacian for {}; use the identity path",
            rc.name()
        )));
    }
    Ok(RcValue { xi, grad, laplacian })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Stream;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn check_grad(f: &dyn Fn(&[f64]) -> f64, g: &[f64], q: &[f64], periodic: bool, tol: f64) {
        let h = 1e-6;
        for k in 0..q.len() {
            let mut qp = q.to_vec();
            qp[k] += h;
            let mut qm = q.to_vec();
            qm[k] -= h;
            let mut diff = f(&qp) - f(&qm);
            if periodic {
                diff = wrap_angle(diff);
            }
            let fd = diff / (2.0 * h);
            let scale = g.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!((fd - g[k]).abs() <= tol * scale, "component {k}: fd {fd} vs {}", g[k]);
        }
    }

    fn near_equilibrium(s: &MolecularSystem, rng: &mut Stream) -> Vec<f64> {
        s.default_configuration().iter().map(|v| v + 0.05 * rng.normal()).collect()
    }

    #[test]
    fn system_gradients_match_finite_differences() {
        let mut rng = Stream::new(11, 0);
        for name in ["toy2d", "three-atom", "butane"] {
            let s = MolecularSystem::from_name(name).unwrap();
            for _ in 0..100 {
                let q = near_equilibrium(&s, &mut rng);
                let (_, g) = eval_system(&s, &q).unwrap();
                check_grad(&|q| s.energy(q), &g, &q, false, 1e-5);
            }
        }
    }

    #[test]
    fn rc_gradients_match_finite_differences() {
        let mut rng = Stream::new(12, 0);
        for rc in [ReactionCoordinate::ToyX, ReactionCoordinate::Angle, ReactionCoordinate::DistanceSquared, ReactionCoordinate::Dihedral] {
            let s = MolecularSystem::from_name(rc.system_name()).unwrap();
            for i in 0..100 {
                let mut q = near_equilibrium(&s, &mut rng);
                if rc == ReactionCoordinate::Dihedral {
                    // spread the dihedral over the whole circle, including the wrap point
                    let b = Butane::default();
                    let phi = -PI + 2.0 * PI * (i as f64 + 0.5) / 100.0;
                    q = b.configuration(phi).iter().map(|v| v + 0.02 * rng.normal()).collect();
                }
                let v = eval_rc(rc, &q, false).unwrap();
                check_grad(&|q| rc.value(q), &v.grad, &q, rc.period().is_some(), 1e-5);
            }
        }
    }

    #[test]
    fn reference_configurations() {
        let s = MolecularSystem::from_name("three-atom").unwrap();
        let q = [-1.0, 0.0, 1.0];
        let (v, _) = eval_system(&s, &q).unwrap();
        let dt = FRAC_PI_2 - 1.187;
        assert!((v - 0.5 * 208.0 * dt.powi(4)).abs() < 1e-12);
        assert!((v - 2.2565).abs() < 1e-4);
        let r = eval_rc(ReactionCoordinate::DistanceSquared, &q, true).unwrap();
        assert_eq!((r.xi, r.laplacian), (2.0, Some(6.0)));
        let r = eval_rc(ReactionCoordinate::Angle, &q, false).unwrap();
        assert!((r.xi - FRAC_PI_2).abs() < 1e-15);
        assert!(eval_rc(ReactionCoordinate::Angle, &q, true).is_err());

        let b = MolecularSystem::from_name("butane").unwrap();
        let (v, g) = eval_system(&b, &b.default_configuration()).unwrap();
        assert!(v.abs() < 1e-12 && g.iter().all(|x| x.abs() < 1e-9));

        let t = MolecularSystem::from_name("toy2d").unwrap();
        assert_eq!(eval_system(&t, &[1.0, 1.0]).unwrap(), (0.0, vec![0.0, 0.0]));
        let r = eval_rc(ReactionCoordinate::ToyX, &[0.3, -2.0], true).unwrap();
        assert_eq!((r.grad, r.laplacian), (vec![1.0, 0.0], Some(0.0)));
        assert!(eval_system(&t, &[1.0]).is_err());
    }

    #[test]
    fn angle_gradient_norm_is_inverse_bond() {
        let mut rng = Stream::new(13, 0);
        for _ in 0..50 {
            let q = [1.0 + 0.1 * rng.normal(), 0.3 + 0.2 * rng.normal(), 0.9 + 0.2 * rng.normal()];
            let r = eval_rc(ReactionCoordinate::Angle, &q, false).unwrap();
            let g2: f64 = r.grad.iter().map(|v| v * v).sum();
            assert!((g2 * (q[1] * q[1] + q[2] * q[2]) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dihedral_of_configurations() {
        let b = Butane::default();
        for phi in [0.0, 0.7, -1.9, PI] {
            let x = ReactionCoordinate::Dihedral.value(&b.configuration(phi));
            assert!((x.abs() - phi.abs()).abs() < 1e-12);
            assert!(x > -PI && x <= PI);
        }
    }

    #[test]
    fn three_atom_reflection_symmetry() {
        let s = ThreeAtom::default();
        for t in [1.0, 1.3, 1.5] {
            let a = s.energy(&s.configuration(t));
            let b = s.energy(&s.configuration(2.0 * s.theta_saddle - t));
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn torsion_minima() {
        let b = Butane::default();
        let n = 3600;
        let mut minima = vec![];
        for i in 0..n {
            let p0 = -PI + 2.0 * PI * (i as f64 + 0.25) / n as f64;
            let p1 = p0 + 2.0 * PI / n as f64;
            if b.torsion(p0).1 < 0.0 && b.torsion(p1).1 >= 0.0 {
                minima.push(0.5 * (p0 + p1));
            }
        }
        assert_eq!(minima.len(), 3);
        assert!(minima.iter().any(|m| m.abs() < 1e-2));
        assert!(minima.iter().any(|m| (m - 2.0 * PI / 3.0).abs() < 0.1));
        assert!(minima.iter().any(|m| (m + 2.0 * PI / 3.0).abs() < 0.1));
        assert_eq!(b.torsion(0.0).0, 0.0);
    }

    #[test]
    fn wrap() {
        assert!((wrap_angle(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-12);
        assert!((wrap_angle(0.5) - 0.5).abs() < 1e-15);
    }
}
