//! Molecular systems in reduced coordinates.

use super::geometry::{angle, bond, dihedral, V3};
use std::f64::consts::FRAC_PI_2;

/// Energy with analytic gradient.
pub trait Potential: Send + Sync {
    fn dof(&self) -> usize;
    /// Writes the gradient into `grad` and returns the energy.
    fn energy_grad(&self, q: &[f64], grad: &mut [f64]) -> f64;
    fn energy(&self, q: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dof()];
        self.energy_grad(q, &mut g)
    }
}

/// V(x, y) = (x^2 - 1)^2 + (k/2)(y - c x)^2. With c = 0 the potential is
/// separable in x and y.
#[derive(Clone, Debug, PartialEq)]
pub struct Toy2d {
    pub k: f64,
    pub c: f64,
}

impl Default for Toy2d {
    fn default() -> Self {
        Toy2d { k: 5.0, c: 1.0 }
    }
}

impl Potential for Toy2d {
    fn dof(&self) -> usize {
        2
    }
    fn energy_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        let (x, y) = (q[0], q[1]);
        let a = x * x - 1.0;
        let d = y - self.c * x;
        g[0] = 4.0 * x * a - self.k * self.c * d;
        g[1] = self.k * d;
        a * a + 0.5 * self.k * d * d
    }
}

/// Three atoms A-B-C with stiff bonds and a double well in the angle at B.
/// Reduced coordinates (qA_x, qC_x, qC_y), with qB = 0 and qA on the x axis.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeAtom {
    pub eps: f64,
    pub k_theta: f64,
    pub l_eq: f64,
    pub theta_saddle: f64,
    pub delta_theta: f64,
}

impl Default for ThreeAtom {
    fn default() -> Self {
        ThreeAtom { eps: 1e-3, k_theta: 208.0, l_eq: 1.0, theta_saddle: FRAC_PI_2, delta_theta: FRAC_PI_2 - 1.187 }
    }
}

impl ThreeAtom {
    /// W3(theta) = (k/2) ((theta - theta_s)^2 - dtheta^2)^2 and its derivative.
    pub fn w3(&self, theta: f64) -> (f64, f64) {
        let d = theta - self.theta_saddle;
        let s = d * d - self.delta_theta * self.delta_theta;
        (0.5 * self.k_theta * s * s, 2.0 * self.k_theta * s * d)
    }

    /// Configuration with unit bonds and the given angle.
    pub fn configuration(&self, theta: f64) -> Vec<f64> {
        vec![self.l_eq, self.l_eq * theta.cos(), self.l_eq * theta.sin()]
    }
}

/// Angle at B and its gradient in reduced coordinates.
pub fn three_atom_angle(q: &[f64]) -> (f64, [f64; 3]) {
    let (a, cx, cy) = (q[0], q[1], q[2]);
    let s = if a >= 0.0 { 1.0 } else { -1.0 };
    let r2 = cx * cx + cy * cy;
    let theta = cy.abs().atan2(s * cx);
    let sy = if cy >= 0.0 { 1.0 } else { -1.0 };
    (theta, [0.0, -s * cy.abs() / r2, s * sy * cx / r2])
}

impl Potential for ThreeAtom {
    fn dof(&self) -> usize {
        3
    }
    fn energy_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        let (a, cx, cy) = (q[0], q[1], q[2]);
        let ra = a.abs();
        let rc = (cx * cx + cy * cy).sqrt();
        let inv = 1.0 / self.eps;
        let (theta, gt) = three_atom_angle(q);
        let (w, dw) = self.w3(theta);
        let da = ra - self.l_eq;
        let dc = rc - self.l_eq;
        g[0] = inv * da * a.signum() + dw * gt[0];
        g[1] = inv * dc * cx / rc + dw * gt[1];
        g[2] = inv * dc * cy / rc + dw * gt[2];
        0.5 * inv * (da * da + dc * dc) + w
    }
}

/// United-atom butane. Reduced coordinates (q1_x, q1_y, q3_y, q4_x, q4_y, q4_z),
/// with q2 = 0 and q1_z = q3_x = q3_z = 0.
#[derive(Clone, Debug, PartialEq)]
pub struct Butane {
    pub k2: f64,
    pub k3: f64,
    pub l_eq: f64,
    pub theta_eq: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for Butane {
    fn default() -> Self {
        Butane { k2: 1000.0, k3: 208.0, l_eq: 1.0, theta_eq: 1.187, c1: 1.18, c2: -0.23, c3: 2.64 }
    }
}

pub fn butane_atoms(q: &[f64]) -> [V3; 4] {
    [[q[0], q[1], 0.0], [0.0; 3], [0.0, q[2], 0.0], [q[3], q[4], q[5]]]
}

pub fn butane_reduce(g: &[V3; 4]) -> [f64; 6] {
    [g[0][0], g[0][1], g[2][1], g[3][0], g[3][1], g[3][2]]
}

impl Butane {
    pub fn torsion(&self, phi: f64) -> (f64, f64) {
        let (c, s) = (phi.cos(), phi.sin());
        let v = self.c1 * (1.0 - c) + 2.0 * self.c2 * (1.0 - c * c) + self.c3 * (1.0 + 3.0 * c - 4.0 * c * c * c);
        let dv = s * (self.c1 + 4.0 * self.c2 * c + self.c3 * (12.0 * c * c - 3.0));
        (v, dv)
    }

    /// Configuration with equilibrium bonds and angles and dihedral `phi`.
    pub fn configuration(&self, phi: f64) -> Vec<f64> {
        let (l, t) = (self.l_eq, self.theta_eq);
        let p1 = [l * t.sin(), l * t.cos()];
        // q4 = q3 + l (sin t cos phi, -cos t, sin t sin phi)
        vec![p1[0], p1[1], l, l * t.sin() * phi.cos(), l - l * t.cos(), l * t.sin() * phi.sin()]
    }
}

impl Potential for Butane {
    fn dof(&self) -> usize {
        6
    }
    fn energy_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        let p = butane_atoms(q);
        let mut gf = [[0.0; 3]; 4];
        let mut e = 0.0;
        for (i, j) in [(0, 1), (1, 2), (2, 3)] {
            let (r, dr) = bond(p[i], p[j]);
            let d = r - self.l_eq;
            e += 0.5 * self.k2 * d * d;
            for k in 0..3 {
                gf[i][k] += self.k2 * d * dr[k];
                gf[j][k] -= self.k2 * d * dr[k];
            }
        }
        for (i, j, l) in [(0, 1, 2), (1, 2, 3)] {
            let (th, ga, gb, gc) = angle(p[i], p[j], p[l]);
            let d = th - self.theta_eq;
            e += 0.5 * self.k3 * d * d;
            for k in 0..3 {
                gf[i][k] += self.k3 * d * ga[k];
                gf[j][k] += self.k3 * d * gb[k];
                gf[l][k] += self.k3 * d * gc[k];
            }
        }
        let (phi, gp) = dihedral(p[0], p[1], p[2], p[3]);
        let (vt, dvt) = self.torsion(phi);
        e += vt;
        for i in 0..4 {
            for k in 0..3 {
                gf[i][k] += dvt * gp[i][k];
            }
        }
        g.copy_from_slice(&butane_reduce(&gf));
        e
    }
}

/// Catalog of systems addressable by name.
#[derive(Clone, Debug, PartialEq)]
pub enum MolecularSystem {
    Toy2d(Toy2d),
    ThreeAtom(ThreeAtom),
    Butane(Butane),
}

impl MolecularSystem {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "toy2d" => Some(MolecularSystem::Toy2d(Toy2d::default())),
            "three-atom" => Some(MolecularSystem::ThreeAtom(ThreeAtom::default())),
            "butane" => Some(MolecularSystem::Butane(Butane::default())),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            MolecularSystem::Toy2d(_) => "toy2d",
            MolecularSystem::ThreeAtom(_) => "three-atom",
            MolecularSystem::Butane(_) => "butane",
        }
    }

    /// A low-energy starting configuration.
    pub fn default_configuration(&self) -> Vec<f64> {
        match self {
            MolecularSystem::Toy2d(_) => vec![1.0, 1.0],
            MolecularSystem::ThreeAtom(s) => s.configuration(s.theta_saddle + s.delta_theta),
            MolecularSystem::Butane(s) => s.configuration(0.0),
        }
    }
}

impl Potential for MolecularSystem {
    fn dof(&self) -> usize {
        match self {
            MolecularSystem::Toy2d(s) => s.dof(),
            MolecularSystem::ThreeAtom(s) => s.dof(),
            MolecularSystem::Butane(s) => s.dof(),
        }
    }
    #[inline]
    fn energy_grad(&self, q: &[f64], g: &mut [f64]) -> f64 {
        match self {
            MolecularSystem::Toy2d(s) => s.energy_grad(q, g),
            MolecularSystem::ThreeAtom(s) => s.energy_grad(q, g),
            MolecularSystem::Butane(s) => s.energy_grad(q, g),
        }
    }
}

