use crate::error::{invalid, Result};
use crate::grid::GridFunction;
use crate::potentials::{MolecularSystem, Potential, ReactionCoordinate};

/// Empirical constants of the entropy estimate: maxima and minima over the
/// sample set, hence lower bounds of the true suprema.
#[derive(Clone, Debug, PartialEq)]
pub struct EntropyConstants {
    /// min and max of |grad xi|
    pub m: f64,
    pub big_m: f64,
    /// max |grad_Sigma F|, F the local mean force
    pub kappa: f64,
    /// max |(|grad xi|^2 - sigma^2(xi)) / sigma^2(xi)|, when sigma^2 is given
    pub lambda: Option<f64>,
}

const H_DIV: f64 = 1e-4;
const H_GRAD: f64 = 1e-3;

fn field(rc: ReactionCoordinate, q: &[f64], g: &mut [f64]) {
    rc.eval(q, g);
    let n2: f64 = g.iter().map(|v| v * v).sum();
    g.iter_mut().for_each(|v| *v /= n2);
}

/// F = grad V . grad xi / |grad xi|^2 - div(grad xi / |grad xi|^2) / beta,
/// the divergence by central differences.
pub fn local_mean_force(system: &MolecularSystem, rc: ReactionCoordinate, beta: f64, q: &[f64]) -> f64 {
    let d = q.len();
    let mut gv = vec![0.0; d];
    system.energy_grad(q, &mut gv);
    let mut gx = vec![0.0; d];
    field(rc, q, &mut gx);
    let proj: f64 = gv.iter().zip(&gx).map(|(a, b)| a * b).sum();
    let mut div = 0.0;
    let (mut qq, mut gp, mut gm) = (q.to_vec(), vec![0.0; d], vec![0.0; d]);
    for k in 0..d {
        qq[k] = q[k] + H_DIV;
        field(rc, &qq, &mut gp);
        qq[k] = q[k] - H_DIV;
        field(rc, &qq, &mut gm);
        qq[k] = q[k];
        div += (gp[k] - gm[k]) / (2.0 * H_DIV);
    }
    proj - div / beta
}

pub fn entropy_bound_constants(
    system: &MolecularSystem,
    rc: ReactionCoordinate,
    beta: f64,
    samples: &[Vec<f64>],
    sigma2: Option<&GridFunction>,
) -> Result<EntropyConstants> {
    if samples.is_empty() {
        return invalid("empty sample set");
    }
    let d = rc.dof();
    let (mut m, mut big_m, mut kappa, mut lambda) = (f64::INFINITY, 0.0f64, 0.0f64, 0.0f64);
    let mut g = vec![0.0; d];
    for q in samples {
        if q.len() != d {
            return invalid("sample dimension does not match the reaction coordinate");
        }
        let xi = rc.eval(q, &mut g);
        let n2: f64 = g.iter().map(|v| v * v).sum();
        m = m.min(n2.sqrt());
        big_m = big_m.max(n2.sqrt());
        if let Some(s2) = sigma2 {
            let s = s2.eval(xi);
            lambda = lambda.max(((n2 - s) / s).abs());
        }
        // gradient of F projected on the tangent space of the level set
        let mut gf = vec![0.0; d];
        let mut qq = q.clone();
        for k in 0..d {
            qq[k] = q[k] + H_GRAD;
            let fp = local_mean_force(system, rc, beta, &qq);
            qq[k] = q[k] - H_GRAD;
            let fm = local_mean_force(system, rc, beta, &qq);
            qq[k] = q[k];
            gf[k] = (fp - fm) / (2.0 * H_GRAD);
        }
        let along: f64 = gf.iter().zip(&g).map(|(a, b)| a * b).sum::<f64>() / n2;
        let t2: f64 = gf.iter().zip(&g).map(|(a, b)| (a - along * b).powi(2)).sum();
        kappa = kappa.max(t2.sqrt());
    }
    Ok(EntropyConstants { m, big_m, kappa, lambda: sigma2.map(|_| lambda) })
}
