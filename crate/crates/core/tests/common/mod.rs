use cgcore::potentials::PairPotential;

/// F'_3(x) by nested trapezoid over (q1, q2), ends at 0 and 3x.
pub fn n3_quadrature_oracle(w: &PairPotential, w2: Option<&PairPotential>, x: f64) -> f64 {
    let l = 3.0 * x;
    let (lo, hi, n) = (-3.0, l + 3.0, 1201);
    let h = (hi - lo) / (n - 1) as f64;
    let (mut z, mut s) = (0.0, 0.0);
    for i in 0..n {
        let q1 = lo + i as f64 * h;
        for j in 0..n {
            let q2 = lo + j as f64 * h;
            let mut e = w.value(q1) + w.value(q2 - q1) + w.value(l - q2);
            let mut f = w.derivative(l - q2);
            if let Some(w2) = w2 {
                e += w2.value(q2) + w2.value(l - q1);
                f += w2.derivative(l - q1);
            }
            let b = (-e).exp();
            z += b;
            s += b * f;
        }
    }
    s / z
}
