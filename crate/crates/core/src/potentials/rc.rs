//! Reaction coordinates.

use super::geometry::dihedral;
use super::systems::{butane_atoms, butane_reduce, three_atom_angle};
use std::f64::consts::{PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReactionCoordinate {
    /// xi(x, y) = x on the 2D toy system.
    ToyX,
    /// Angle at the central atom of the three-atom molecule.
    Angle,
    /// Squared A-C distance of the three-atom molecule.
    DistanceSquared,
    /// Butane dihedral angle, periodic on (-pi, pi].
    Dihedral,
}

impl ReactionCoordinate {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "x" => Some(Self::ToyX),
            "angle" => Some(Self::Angle),
            "distance-squared" => Some(Self::DistanceSquared),
            "dihedral" => Some(Self::Dihedral),
            _ => None,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ToyX => "x",
            Self::Angle => "angle",
            Self::DistanceSquared => "distance-squared",
            Self::Dihedral => "dihedral",
        }
    }

    /// Name of the system the coordinate is defined on.
    pub fn system_name(&self) -> &'static str {
        match self {
            Self::ToyX => "toy2d",
            Self::Angle | Self::DistanceSquared => "three-atom",
            Self::Dihedral => "butane",
        }
    }

    pub fn dof(&self) -> usize {
        match self {
            Self::ToyX => 2,
            Self::Angle | Self::DistanceSquared => 3,
            Self::Dihedral => 6,
        }
    }

    pub fn period(&self) -> Option<f64> {
        match self {
            Self::Dihedral => Some(TAU),
            _ => None,
        }
    }

    /// Writes the gradient into `grad` and returns the value.
    #[inline]
    pub fn eval(&self, q: &[f64], grad: &mut [f64]) -> f64 {
        match self {
            Self::ToyX => {
                grad[0] = 1.0;
                grad[1] = 0.0;
                q[0]
            }
            Self::Angle => {
                let (t, g) = three_atom_angle(q);
                grad.copy_from_slice(&g);
                t
            }
            Self::DistanceSquared => {
                let d = q[0] - q[1];
                grad[0] = 2.0 * d;
                grad[1] = -2.0 * d;
                grad[2] = 2.0 * q[2];
                d * d + q[2] * q[2]
            }
            Self::Dihedral => {
                let p = butane_atoms(q);
                let (phi, g) = dihedral(p[0], p[1], p[2], p[3]);
                grad.copy_from_slice(&butane_reduce(&g));
                phi
            }
        }
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        let mut g = vec![0.0; self.dof()];
        self.eval(q, &mut g)
    }

    /// Laplacian of the coordinate, where available in closed form.
    #[inline]
    pub fn laplacian(&self, _q: &[f64]) -> Option<f64> {
        match self {
            Self::ToyX => Some(0.0),
            Self::DistanceSquared => Some(6.0),
            Self::Angle | Self::Dihedral => None,
        }
    }
}

/// Wraps an angle into (-pi, pi].
#[inline]
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(TAU) - PI;
    if y <= -PI {
        y + TAU
    } else {
        y
    }
}
