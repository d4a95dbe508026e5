use super::coefficients::CoefficientTable;
use crate::error::{invalid, Error, Result};
use crate::grid::{cumulative_trapezoid, poly_fit, GridFunction, UniformGrid};
use crate::stats;
use std::f64::consts::PI;

/// Large-deviation residence time tau0 exp(beta delta_a).
#[derive(Clone, Debug, PartialEq)]
pub struct KramersEstimate {
    pub delta_a: f64,
    pub omega_sp: f64,
    pub omega_well: f64,
    pub tau0: f64,
    pub z_sp: f64,
    pub z_well: f64,
    /// sigma at the saddle and in the well, when a sigma profile was supplied.
    pub sigma_sp: Option<f64>,
    pub sigma_well: Option<f64>,
}

impl KramersEstimate {
    pub fn predict(&self, beta: f64) -> f64 {
        self.tau0 * (beta * self.delta_a).exp()
    }
}

const FIT_HALF: usize = 3;

struct Extremum {
    z: f64,
    value: f64,
    curvature: f64,
}

/// Takes the extremal node within 3 nodes of `z` and fits the 7 nodes
/// around it.
fn extremum(a: &GridFunction, z: f64, minimum: bool) -> Result<Extremum> {
    let g = &a.grid;
    let n = g.n as isize;
    let at = |i: isize| -> Option<(f64, f64)> {
        if a.periodic {
            let j = i.rem_euclid(n) as usize;
            Some((g.lo + i as f64 * g.step, a.values[j]))
        } else if i < 0 || i >= n {
            None
        } else {
            Some((g.node(i as usize), a.values[i as usize]))
        }
    };
    let sgn = if minimum { 1.0 } else { -1.0 };
    let mut i = ((z - g.lo) / g.step).round() as isize;
    if !a.periodic {
        i = i.clamp(0, n - 1);
    }
    // extremal node within the fit half-width of the requested location
    let w = FIT_HALF as isize;
    let c = i;
    for j in c - w..=c + w {
        if let (Some(p), Some(q)) = (at(j), at(i)) {
            if p.1 * sgn < q.1 * sgn {
                i = j;
            }
        }
    }
    let pts: Option<Vec<(f64, f64)>> = (-(FIT_HALF as isize)..=FIT_HALF as isize).map(|d| at(i + d)).collect();
    let pts = pts.ok_or_else(|| Error::OutOfRange(format!("extremum near {z} is too close to the grid edge for a 7-point fit")))?;
    let (x, y): (Vec<f64>, Vec<f64>) = pts.into_iter().unzip();
    let x0 = x[FIT_HALF];
    // quadratic fit for the curvature sign; a cubic correction moves the
    // curvature from the node to the fitted extremum
    let q = poly_fit(&x, &y, x0, 2);
    if q[2] * sgn <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "expected a local {} near {z}, found curvature {}",
            if minimum { "minimum" } else { "maximum" },
            2.0 * q[2]
        )));
    }
    let c = poly_fit(&x, &y, x0, 3);
    let mut dz = -q[1] / (2.0 * q[2]);
    for _ in 0..20 {
        let d1 = c[1] + 2.0 * c[2] * dz + 3.0 * c[3] * dz * dz;
        let d2 = 2.0 * c[2] + 6.0 * c[3] * dz;
        dz -= d1 / d2;
    }
    if !(dz.abs() <= FIT_HALF as f64 * g.step) {
        return Err(Error::OutOfRange(format!("no local extremum within 3 nodes of {z}")));
    }
    let curvature = 2.0 * c[2] + 6.0 * c[3] * dz;
    let value = c[0] + dz * (c[1] + dz * (c[2] + dz * c[3]));
    Ok(Extremum { z: x0 + dz, value, curvature })
}

/// Barrier, curvatures and prefactor of the escape from the well near
/// `z_well` over the saddle near `z_sp`. With a sigma profile the prefactor
/// is divided by sigma(z_sp) sigma(z_well).
pub fn kramers_time(a: &GridFunction, z_well: f64, z_sp: f64, sigma: Option<&GridFunction>) -> Result<KramersEstimate> {
    if a.grid.n < 2 * FIT_HALF + 1 {
        return invalid("profile needs at least 7 nodes");
    }
    let w = extremum(a, z_well, true)?;
    let s = extremum(a, z_sp, false)?;
    let omega_well = w.curvature.abs().sqrt();
    let omega_sp = s.curvature.abs().sqrt();
    let mut tau0 = 2.0 * PI / (omega_sp * omega_well);
    let (mut sigma_sp, mut sigma_well) = (None, None);
    if let Some(sg) = sigma {
        let (ss, sw) = (sg.eval(s.z), sg.eval(w.z));
        if !(ss > 0.0 && sw > 0.0) {
            return invalid("sigma must be positive at the extrema");
        }
        tau0 /= ss * sw;
        sigma_sp = Some(ss);
        sigma_well = Some(sw);
    }
    Ok(KramersEstimate {
        delta_a: s.value - w.value,
        omega_sp,
        omega_well,
        tau0,
        z_sp: s.z,
        z_well: w.z,
        sigma_sp,
        sigma_well,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct ArrheniusFit {
    pub tau0: f64,
    pub s: f64,
    /// Standard errors of ln tau0 and s from the weights.
    pub se_ln_tau0: f64,
    pub se_s: f64,
    /// ln tau - (ln tau0 + s beta) at each point.
    pub residuals: Vec<f64>,
}

/// Weighted least squares of ln tau = ln tau0 + s beta over (beta, tau, tau_err);
/// weights (tau / tau_err)^2, or uniform when any error is zero.
pub fn fit_arrhenius(points: &[(f64, f64, f64)]) -> Result<ArrheniusFit> {
    if points.len() < 2 {
        return invalid("Arrhenius fit needs at least two points");
    }
    if points.iter().any(|p| !(p.1 > 0.0) || !p.0.is_finite()) {
        return invalid("residence times must be positive");
    }
    let b0 = points[0].0;
    if points.iter().all(|p| (p.0 - b0).abs() <= 1e-12 * b0.abs().max(1.0)) {
        return invalid("all points share the same beta");
    }
    let x: Vec<f64> = points.iter().map(|p| p.0).collect();
    let y: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let w: Vec<f64> = if points.iter().all(|p| p.2 > 0.0) {
        points.iter().map(|p| (p.1 / p.2).powi(2)).collect()
    } else {
        vec![1.0; points.len()]
    };
    let (a, s, se_a, se_s) = stats::weighted_line_fit(&x, &y, &w);
    let residuals = x.iter().zip(&y).map(|(x, y)| y - (a + s * x)).collect();
    Ok(ArrheniusFit { tau0: a.exp(), s, se_ln_tau0: se_a, se_s, residuals })
}

/// Coordinate change h(z) = z0/sigma(z0) + int_{z0}^z 1/sigma, and the table
/// of the free-energy dynamics in h: A~(h(z)) = A(z), A~'(h(z)) = sigma(z) A'(z),
/// unit diffusion, resampled onto a uniform grid with the same node count.
pub fn rescale_by_sigma(table: &CoefficientTable) -> Result<(GridFunction, CoefficientTable)> {
    let (first, last) = table.unmasked_range()?;
    let sig = table.sigma()?;
    if sig.values.iter().any(|s| !(*s > 0.0)) {
        return invalid("sigma^2 must be positive on every unmasked bin");
    }
    let m = last - first + 1;
    let step = table.grid.step;
    let z0 = table.grid.node(first);
    let inv: Vec<f64> = sig.values.iter().map(|s| 1.0 / s).collect();
    let base = z0 / sig.values[0];
    let h: Vec<f64> = cumulative_trapezoid(&inv, step).into_iter().map(|v| base + v).collect();
    let a = &table.a[first..=last];
    let ap: Vec<f64> = (0..m).map(|i| sig.values[i] * table.a_prime[first + i]).collect();
    let counts = &table.counts[first..=last];

    let (grid, period) = if table.periodic {
        let p = h[m - 1] - h[0] + 0.5 * step * (inv[m - 1] + inv[0]);
        (UniformGrid::with_step(h[0], p / m as f64, m), Some(p))
    } else {
        (UniformGrid::new(h[0], h[m - 1], m)?, None)
    };
    // piecewise-linear interpolation in the nonuniform nodes h
    let mut hx = h.clone();
    let ext = |v: &[f64]| -> Vec<f64> {
        let mut v = v.to_vec();
        if period.is_some() {
            v.push(v[0]);
        }
        v
    };
    if let Some(p) = period {
        hx.push(h[0] + p);
    }
    let interp = |v: &[f64], t: f64| -> f64 {
        let k = hx.partition_point(|&x| x <= t).clamp(1, hx.len() - 1);
        let f = ((t - hx[k - 1]) / (hx[k] - hx[k - 1])).clamp(0.0, 1.0);
        v[k - 1] * (1.0 - f) + v[k] * f
    };
    let (ae, ape) = (ext(a), ext(&ap));
    let ce: Vec<f64> = ext(&counts.iter().map(|&c| c as f64).collect::<Vec<_>>());
    let nodes = grid.nodes();
    let a_new: Vec<f64> = nodes.iter().map(|&t| interp(&ae, t)).collect();
    let ap_new: Vec<f64> = nodes.iter().map(|&t| interp(&ape, t)).collect();
    let b_new: Vec<f64> = ap_new.iter().map(|v| -v).collect();
    let c_new: Vec<u64> = nodes.iter().map(|&t| interp(&ce, t).round() as u64).collect();
    let out = CoefficientTable {
        rc: format!("h({})", table.rc),
        beta: table.beta,
        grid,
        periodic: table.periodic,
        path: table.path,
        a: a_new,
        a_prime: ap_new,
        b: b_new.clone(),
        sigma2: vec![1.0; m],
        counts: c_new,
        masked: vec![false; m],
        b_identity: b_new,
        b_direct: None,
        ci: None,
    };
    let hgrid = UniformGrid::with_step(z0, step, m);
    Ok((GridFunction::new(hgrid, h, false)?, out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cg_dynamics::CoefPath;
    use crate::potentials::ThreeAtom;

    fn w3_profile() -> (ThreeAtom, GridFunction) {
        let s = ThreeAtom::default();
        let g = UniformGrid::new(0.8, 2.4, 1601).unwrap();
        (s.clone(), GridFunction::from_fn(g, |t| s.w3(t).0))
    }

    #[test]
    fn analytic_angle_profile_constants() {
        let (s, a) = w3_profile();
        let k = kramers_time(&a, s.theta_saddle + s.delta_theta, s.theta_saddle, None).unwrap();
        assert!((k.delta_a - 2.25648).abs() < 1e-3, "{}", k.delta_a);
        assert!((k.omega_sp - 7.828).abs() < 0.01, "{}", k.omega_sp);
        assert!((k.omega_well - 11.07).abs() < 0.01, "{}", k.omega_well);
        assert!((k.tau0 - 0.0725).abs() < 1e-3, "{}", k.tau0);
        // closed forms: A'' = -2 k dt^2 at the saddle, 4 k dt^2 in the wells
        let dt2 = s.delta_theta * s.delta_theta;
        assert!((k.omega_sp - (2.0 * s.k_theta * dt2).sqrt()).abs() < 1e-3);
        assert!((k.omega_well - (4.0 * s.k_theta * dt2).sqrt()).abs() < 1e-3);
        assert!((k.delta_a - 0.5 * s.k_theta * dt2 * dt2).abs() < 1e-8);
        assert!((k.predict(2.0) - k.tau0 * (2.0 * k.delta_a).exp()).abs() < 1e-12);
    }

    fn quintic() -> GridFunction {
        let c = [-16.4433, 3.87398, 34.2171, -6.36938, -7.89431];
        let g = UniformGrid::new(0.8, 3.0, 2201).unwrap();
        GridFunction::from_fn(g, |x| (0..5).map(|k| c[k] * (x - 2.0f64).powi(k as i32 + 2) / (k as f64 + 2.0)).sum())
    }

    #[test]
    fn distance_profile_free_and_sigma_corrected() {
        let a = quintic();
        let k = kramers_time(&a, 1.25, 2.0, None).unwrap();
        assert!((k.omega_sp - 4.055).abs() < 0.01, "{}", k.omega_sp);
        assert!((k.omega_well - 5.809).abs() / 5.809 < 0.01, "{}", k.omega_well);
        assert!((k.tau0 - 0.267).abs() < 0.003, "{}", k.tau0);
        // sigma linear through sigma(1.25) = 2.563 and sigma(2) = 3.465
        let sg = GridFunction::from_fn(a.grid, |x| 2.563 + (x - 1.25) * (3.465 - 2.563) / 0.75);
        let ke = kramers_time(&a, 1.25, 2.0, Some(&sg)).unwrap();
        assert!((ke.tau0 - 0.03).abs() < 0.001, "{}", ke.tau0);
    }

    #[test]
    fn wrong_curvature_is_rejected() {
        let (s, a) = w3_profile();
        assert!(kramers_time(&a, s.theta_saddle, s.theta_saddle, None).is_err());
        assert!(kramers_time(&a, s.theta_saddle + s.delta_theta, s.theta_saddle + s.delta_theta, None).is_err());
    }

    #[test]
    fn arrhenius_two_exact_points() {
        let f = |b: f64| 0.07521 * (2.25031 * b).exp();
        let fit = fit_arrhenius(&[(1.0, f(1.0), 0.0), (3.0, f(3.0), 0.0)]).unwrap();
        assert!((fit.tau0 - 0.07521).abs() < 1e-12 && (fit.s - 2.25031).abs() < 1e-12);
        let pts: Vec<_> = [1.0, 1.5, 2.0, 3.0].iter().map(|&b| (b, f(b), 0.01 * f(b))).collect();
        let fit = fit_arrhenius(&pts).unwrap();
        assert!((fit.s - 2.25031).abs() < 1e-10 && fit.residuals.iter().all(|r| r.abs() < 1e-10));
    }

    #[test]
    fn arrhenius_errors() {
        assert!(fit_arrhenius(&[(1.0, 1.0, 0.1)]).is_err());
        assert!(fit_arrhenius(&[(1.0, 1.0, 0.1), (1.0, 2.0, 0.1)]).is_err());
        assert!(fit_arrhenius(&[(1.0, -1.0, 0.1), (2.0, 2.0, 0.1)]).is_err());
    }

    fn table(sigma: f64, periodic: bool) -> CoefficientTable {
        let n = 201;
        let grid = if periodic { UniformGrid::with_step(-PI + PI / n as f64, 2.0 * PI / n as f64, n) } else { UniformGrid::new(0.8, 2.4, n).unwrap() };
        let s = ThreeAtom::default();
        let a: Vec<f64> = grid.nodes().iter().map(|&t| if periodic { 1.0 - (3.0 * t).cos() } else { s.w3(t).0 }).collect();
        let ap: Vec<f64> = grid.nodes().iter().map(|&t| if periodic { 3.0 * (3.0 * t).sin() } else { s.w3(t).1 }).collect();
        let b: Vec<f64> = ap.iter().map(|v| -sigma * sigma * v).collect();
        CoefficientTable {
            rc: "test".into(),
            beta: 1.0,
            grid,
            periodic,
            path: CoefPath::Identity,
            a,
            a_prime: ap,
            b: b.clone(),
            sigma2: vec![sigma * sigma; n],
            counts: vec![1000; n],
            masked: vec![false; n],
            b_identity: b,
            b_direct: None,
            ci: None,
        }
    }

    #[test]
    fn unit_sigma_rescaling_is_identity() {
        let t = table(1.0, false);
        let (h, r) = rescale_by_sigma(&t).unwrap();
        for i in 0..t.grid.n {
            assert!((h.values[i] - t.grid.node(i)).abs() < 1e-12);
            assert!((r.grid.node(i) - t.grid.node(i)).abs() < 1e-12);
            assert!((r.a[i] - t.a[i]).abs() < 1e-9 && (r.a_prime[i] - t.a_prime[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn constant_sigma_rescales_time() {
        let c = 1.3;
        let t = table(c, false);
        let (h, r) = rescale_by_sigma(&t).unwrap();
        for i in 0..t.grid.n {
            assert!((h.values[i] - t.grid.node(i) / c).abs() < 1e-12);
        }
        assert!(h.values.windows(2).all(|w| w[1] > w[0]));
        let s = ThreeAtom::default();
        let k0 = kramers_time(&t.free_energy().unwrap(), s.theta_saddle + s.delta_theta, s.theta_saddle, None).unwrap();
        let k1 = kramers_time(&r.free_energy().unwrap(), (s.theta_saddle + s.delta_theta) / c, s.theta_saddle / c, None).unwrap();
        assert!((k1.tau0 - k0.tau0 / (c * c)).abs() < 1e-3 * k0.tau0, "{} vs {}", k1.tau0, k0.tau0 / (c * c));
        assert!((k1.delta_a - k0.delta_a).abs() < 1e-6);
        let ks = kramers_time(&t.free_energy().unwrap(), s.theta_saddle + s.delta_theta, s.theta_saddle, Some(&t.sigma().unwrap())).unwrap();
        assert!((ks.tau0 - k1.tau0).abs() < 1e-3 * k1.tau0);
    }

    #[test]
    fn periodic_rescaling_keeps_the_period() {
        let c = 0.8;
        let t = table(c, true);
        let (h, r) = rescale_by_sigma(&t).unwrap();
        assert!(h.values.windows(2).all(|w| w[1] > w[0]));
        assert!((r.grid.step * r.grid.n as f64 - 2.0 * PI / c).abs() < 1e-9);
        assert!((r.a[0] - t.a[0]).abs() < 1e-9);
    }

    #[test]
    fn masked_bins_block_rescaling() {
        let mut t = table(1.0, false);
        t.masked[50] = true;
        assert!(rescale_by_sigma(&t).is_err());
    }
}
