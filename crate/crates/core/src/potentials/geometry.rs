//! Internal coordinates in 3D with gradients.

pub type V3 = [f64; 3];

#[inline]
pub fn sub(a: V3, b: V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}
#[inline]
pub fn dot(a: V3, b: V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
#[inline]
pub fn cross(a: V3, b: V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}
#[inline]
pub fn norm(a: V3) -> f64 {
    dot(a, a).sqrt()
}
#[inline]
pub fn scale(a: V3, s: f64) -> V3 {
    [a[0] * s, a[1] * s, a[2] * s]
}

/// Distance |a - b| and its gradient with respect to a (minus that for b).
pub fn bond(a: V3, b: V3) -> (f64, V3) {
    let d = sub(a, b);
    let r = norm(d);
    (r, scale(d, 1.0 / r))
}

/// Angle at `b` between a-b and c-b, with gradients with respect to a, b, c.
pub fn angle(a: V3, b: V3, c: V3) -> (f64, V3, V3, V3) {
    let u = sub(a, b);
    let v = sub(c, b);
    let (nu, nv) = (norm(u), norm(v));
    let cr = norm(cross(u, v));
    let theta = cr.atan2(dot(u, v));
    let cos = theta.cos();
    let sin = theta.sin();
    let ga = scale(sub(scale(u, cos / nu), scale(v, 1.0 / nv)), 1.0 / (nu * sin));
    let gc = scale(sub(scale(v, cos / nv), scale(u, 1.0 / nu)), 1.0 / (nv * sin));
    let gb = [-ga[0] - gc[0], -ga[1] - gc[1], -ga[2] - gc[2]];
    (theta, ga, gb, gc)
}

/// Dihedral angle of p1-p2-p3-p4 in (-pi, pi], IUPAC sign, zero when cis.
pub fn dihedral(p1: V3, p2: V3, p3: V3, p4: V3) -> (f64, [V3; 4]) {
    let b1 = sub(p2, p1);
    let b2 = sub(p3, p2);
    let b3 = sub(p4, p3);
    let n1 = cross(b1, b2);
    let n2 = cross(b2, b3);
    let nb2 = norm(b2);
    let mut phi = (nb2 * dot(b1, n2)).atan2(dot(n1, n2));
    if phi <= -std::f64::consts::PI {
        phi += std::f64::consts::TAU;
    }
    let g1 = scale(n1, -nb2 / dot(n1, n1));
    let g4 = scale(n2, nb2 / dot(n2, n2));
    let s1 = dot(b1, b2) / (nb2 * nb2);
    let s3 = dot(b3, b2) / (nb2 * nb2);
    let g2: V3 = std::array::from_fn(|k| (-s1 - 1.0) * g1[k] + s3 * g4[k]);
    let g3: V3 = std::array::from_fn(|k| -g1[k] - g2[k] - g4[k]);
    (phi, [g1, g2, g3, g4])
}
