//! Python bindings. Arrays cross the boundary as lists of floats.

use cgcore::cg_dynamics::{self as cg, CoefPath, CoefficientConfig};
use cgcore::chain_mc::ChainMcConfig;
use cgcore::chain_nn::{self, ChainModelNN, Quadrature};
use cgcore::chain_nnn::{self, ChainModelNNN, VarianceConfig};
use cgcore::fp1d::{self, DensityGrid};
use cgcore::grid::{GridFunction, UniformGrid};
use cgcore::potentials::{MolecularSystem, PairPotential, Potential, ReactionCoordinate, ThreeAtom};
use cgcore::sde::{self, Bias, Coef, Domain, Dynamics, DynamicsKind, Initials, Region, ResidenceConfig, Sde1d, TrajectoryConfig};
use cgcore::transfer_operator::{log_lambda_curve, YGrid};
use cgcore::Error;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn py_err(e: Error) -> PyErr {
    match e.exit_code() {
        2 => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

trait OrPyErr<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> OrPyErr<T> for cgcore::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn value_err<T>(msg: String) -> PyResult<T> {
    Err(PyValueError::new_err(msg))
}

fn pair(name: &str) -> PyResult<PairPotential> {
    PairPotential::parse(name).map_or_else(|| value_err(format!("unknown potential '{name}'")), Ok)
}

fn system(name: &str) -> PyResult<MolecularSystem> {
    MolecularSystem::from_name(name).map_or_else(|| value_err(format!("unknown system '{name}'")), Ok)
}

fn coordinate(name: &str) -> PyResult<ReactionCoordinate> {
    ReactionCoordinate::from_name(name).map_or_else(|| value_err(format!("unknown reaction coordinate '{name}'")), Ok)
}

fn kind(name: &str) -> PyResult<DynamicsKind> {
    DynamicsKind::from_name(name).map_or_else(|| value_err(format!("unknown dynamics '{name}'")), Ok)
}

fn mc(steps: u64, burn_in: u64, realizations: usize, seed: u64) -> ChainMcConfig {
    let d = ChainMcConfig::default();
    ChainMcConfig { traj: TrajectoryConfig { steps, burn_in, seed, ..d.traj }, realizations, ..d }
}

/// Nearest-neighbour chain with pair potential W at inverse temperature beta.
#[pyclass(name = "ChainNN")]
struct PyChainNN {
    m: ChainModelNN,
}

#[pymethods]
impl PyChainNN {
    #[new]
    #[pyo3(signature = (potential = "paper-quartic-W1", beta = 1.0))]
    fn new(potential: &str, beta: f64) -> PyResult<Self> {
        Ok(PyChainNN { m: ChainModelNN::new(pair(potential)?, beta).py()? })
    }

    /// Strain y*(f) of the chain under stress f.
    #[pyo3(signature = (f, nodes = 4001))]
    fn strain(&self, f: f64, nodes: usize) -> PyResult<f64> {
        chain_nn::strain_for_stress_nn(&self.m, f, &Quadrature::Auto { n: nodes }).py()
    }

    /// Thermodynamic-limit free energy F and force F' at strain x.
    #[pyo3(signature = (x, nodes = 4001))]
    fn free_energy<'py>(&self, py: Python<'py>, x: f64, nodes: usize) -> PyResult<Bound<'py, PyDict>> {
        let r = chain_nn::free_energy_limit_nn(&self.m, x, &Quadrature::Auto { n: nodes }).py()?;
        let d = PyDict::new_bound(py);
        d.set_item("F", r.f_inf)?;
        d.set_item("F_prime", r.f_inf_prime)?;
        d.set_item("xi_star", r.xi_star)?;
        Ok(d)
    }

    /// Monte Carlo mean force of a fixed-end chain of n bonds; (estimate, half width).
    #[pyo3(signature = (x, n, steps = 200_000, burn_in = 20_000, realizations = 40, seed = 0))]
    fn reference_force(&self, x: f64, n: usize, steps: u64, burn_in: u64, realizations: usize, seed: u64) -> PyResult<(f64, f64)> {
        let r = chain_nn::reference_force_mc_nn(&self.m, x, n, &mc(steps, burn_in, realizations, seed)).py()?;
        Ok((r.estimate, r.half_width_95))
    }
}

/// Chain with nearest (W1) and next-to-nearest (W2) neighbour interactions.
#[pyclass(name = "ChainNNN")]
struct PyChainNNN {
    m: ChainModelNNN,
}

#[pymethods]
impl PyChainNNN {
    #[new]
    #[pyo3(signature = (w1 = "paper-quartic-W1", w2 = "paper-quartic-W2", beta = 1.0))]
    fn new(w1: &str, w2: &str, beta: f64) -> PyResult<Self> {
        Ok(PyChainNNN { m: ChainModelNNN::new(pair(w1)?, pair(w2)?, beta).py()? })
    }

    #[pyo3(signature = (f, y_nodes = 400))]
    fn strain(&self, f: f64, y_nodes: usize) -> PyResult<f64> {
        chain_nnn::strain_for_stress_nnn(&self.m, f, YGrid::Auto { n: y_nodes }).py()
    }

    /// ln lambda on a uniform tilt grid: dict with xi, log_lambda, log_Lambda, mean.
    #[pyo3(signature = (xi_lo = -10.0, xi_hi = 10.0, xi_nodes = 401, y_nodes = 400))]
    fn spectrum<'py>(&self, py: Python<'py>, xi_lo: f64, xi_hi: f64, xi_nodes: usize, y_nodes: usize) -> PyResult<Bound<'py, PyDict>> {
        let t = log_lambda_curve(&self.m.w1, &self.m.w2, self.m.beta, UniformGrid::new(xi_lo, xi_hi, xi_nodes).py()?, YGrid::Auto { n: y_nodes }).py()?;
        let d = PyDict::new_bound(py);
        d.set_item("xi", t.xi.nodes())?;
        d.set_item("log_Lambda", t.log_big_lambda())?;
        d.set_item("log_lambda", t.log_lambda)?;
        d.set_item("log_lambda0", t.log_lambda0)?;
        d.set_item("mean", t.mean)?;
        Ok(d)
    }

    /// Thermodynamic-limit forces F'(x) for every x, from one spectral table.
    #[pyo3(signature = (xs, xi_lo = -12.0, xi_hi = 30.0, xi_nodes = 841, y_nodes = 400))]
    fn forces(&self, xs: Vec<f64>, xi_lo: f64, xi_hi: f64, xi_nodes: usize, y_nodes: usize) -> PyResult<Vec<f64>> {
        let t = log_lambda_curve(&self.m.w1, &self.m.w2, self.m.beta, UniformGrid::new(xi_lo, xi_hi, xi_nodes).py()?, YGrid::Auto { n: y_nodes }).py()?;
        xs.iter().map(|&x| chain_nnn::free_energy_limit_nnn(&self.m, x, &t).map(|r| r.f_inf_prime).py()).collect()
    }

    /// Asymptotic variance of the strain under stress f; (sigma2, half width).
    #[pyo3(signature = (f, samples = 1_000_000, seed = 0))]
    fn variance(&self, f: f64, samples: usize, seed: u64) -> PyResult<(f64, f64)> {
        let r = chain_nnn::asymptotic_variance_nnn(&self.m, f, samples, &VarianceConfig { seed, ..Default::default() }).py()?;
        Ok((r.sigma2, r.half_width_95))
    }

    #[pyo3(signature = (x, n, steps = 200_000, burn_in = 20_000, realizations = 40, seed = 0))]
    fn reference_force(&self, x: f64, n: usize, steps: u64, burn_in: u64, realizations: usize, seed: u64) -> PyResult<(f64, f64)> {
        let r = chain_nnn::reference_force_mc_nnn(&self.m, x, n, &mc(steps, burn_in, realizations, seed)).py()?;
        Ok((r.estimate, r.half_width_95))
    }

    /// phi(x), phi'(x) and, when n is given, J_n(x) with its minimiser.
    #[pyo3(signature = (x, n = None))]
    fn zero_temperature<'py>(&self, py: Python<'py>, x: f64, n: Option<usize>) -> PyResult<Bound<'py, PyDict>> {
        let z = chain_nnn::zero_temperature(&self.m, x, n).py()?;
        let d = PyDict::new_bound(py);
        d.set_item("phi", z.phi)?;
        d.set_item("phi_prime", z.phi_prime)?;
        d.set_item("convexity_warning", z.convexity_warning)?;
        if let Some((j, q)) = z.j_n {
            d.set_item("J", j)?;
            d.set_item("positions", q)?;
        }
        Ok(d)
    }
}

/// Coefficient table along a reaction coordinate.
#[pyclass(name = "CoefficientTable")]
struct PyTable {
    t: cg::CoefficientTable,
}

#[pymethods]
impl PyTable {
    #[getter]
    fn z(&self) -> Vec<f64> {
        self.t.grid.nodes()
    }
    #[getter(A)]
    fn a(&self) -> Vec<f64> {
        self.t.a.clone()
    }
    #[getter(A_prime)]
    fn a_prime(&self) -> Vec<f64> {
        self.t.a_prime.clone()
    }
    #[getter]
    fn b(&self) -> Vec<f64> {
        self.t.b.clone()
    }
    #[getter]
    fn sigma2(&self) -> Vec<f64> {
        self.t.sigma2.clone()
    }
    #[getter]
    fn counts(&self) -> Vec<u64> {
        self.t.counts.clone()
    }
    #[getter]
    fn masked(&self) -> Vec<bool> {
        self.t.masked.clone()
    }
    #[getter]
    fn beta(&self) -> f64 {
        self.t.beta
    }
    #[getter]
    fn rc(&self) -> String {
        self.t.rc.clone()
    }

    fn to_csv(&self) -> PyResult<String> {
        let mut buf = Vec::new();
        self.t.write_csv(&mut buf).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(String::from_utf8(buf).expect("ascii"))
    }

    #[staticmethod]
    #[pyo3(signature = (text, rc, beta, path = "identity"))]
    fn from_csv(text: &str, rc: &str, beta: f64, path: &str) -> PyResult<Self> {
        let r = coordinate(rc)?;
        let p = CoefPath::from_name(path).map_or_else(|| value_err(format!("unknown path '{path}'")), Ok)?;
        Ok(PyTable { t: cg::CoefficientTable::parse_csv(text, r.name(), beta, r.period().is_some(), p).py()? })
    }

    /// Kramers estimate from the table's free energy: dict with delta_a, omega_sp, omega_well, tau0.
    #[pyo3(signature = (z_well, z_sp, with_sigma = false))]
    fn kramers<'py>(&self, py: Python<'py>, z_well: f64, z_sp: f64, with_sigma: bool) -> PyResult<Bound<'py, PyDict>> {
        let s = if with_sigma { Some(self.t.sigma().py()?) } else { None };
        kramers_dict(py, cg::kramers_time(&self.t.free_energy().py()?, z_well, z_sp, s.as_ref()).py()?)
    }

    /// Draws n values from exp(-beta A) restricted to a region such as "above:1.7".
    #[pyo3(signature = (region, n, seed = 0))]
    fn sample_restricted(&self, region: &str, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        self.t.sample_restricted(&Region::parse(region).py()?, n, seed).py()
    }

    /// Residence times of the effective or free-energy dynamics from z0.
    #[pyo3(signature = (kind, z0, exit, dt = 1e-3, seed = 0))]
    fn residence_times<'py>(&self, py: Python<'py>, kind: &str, z0: Vec<f64>, exit: &str, dt: f64, seed: u64) -> PyResult<Bound<'py, PyDict>> {
        let k = self::kind(kind)?;
        let sde = cg::make_sde(&self.t, k).py()?;
        let cfg = ResidenceConfig { dt, seed, ..Default::default() };
        let r = sde::residence_times(&Dynamics::OneD { sde: &sde, kind: k }, Initials::OneD(&z0), &Region::parse(exit).py()?, &cfg).py()?;
        residence_dict(py, r)
    }
}

fn kramers_dict(py: Python<'_>, k: cg::KramersEstimate) -> PyResult<Bound<'_, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("delta_a", k.delta_a)?;
    d.set_item("omega_sp", k.omega_sp)?;
    d.set_item("omega_well", k.omega_well)?;
    d.set_item("tau0", k.tau0)?;
    d.set_item("z_well", k.z_well)?;
    d.set_item("z_sp", k.z_sp)?;
    d.set_item("sigma_well", k.sigma_well)?;
    d.set_item("sigma_sp", k.sigma_sp)?;
    Ok(d)
}

fn residence_dict(py: Python<'_>, r: sde::ResidenceTimeReport) -> PyResult<Bound<'_, PyDict>> {
    let d = PyDict::new_bound(py);
    d.set_item("kind", r.kind.name())?;
    d.set_item("n", r.n)?;
    d.set_item("mean", r.mean)?;
    d.set_item("half_width_95", r.half_width_95)?;
    d.set_item("censored", r.censored)?;
    d.set_item("times", r.times)?;
    Ok(d)
}

/// Estimates A, A', b and sigma^2 from equilibrium trajectories.
/// bias: "none", "torsion" (butane) or "w3" (three-atom angle).
#[pyfunction]
#[pyo3(signature = (system_name, rc, beta = 1.0, steps = 2_000_000, realizations = 8, bins = 256, seed = 0, path = "identity", bias = "none"))]
#[allow(clippy::too_many_arguments)]
fn estimate_coefficients(
    system_name: &str,
    rc: &str,
    beta: f64,
    steps: u64,
    realizations: usize,
    bins: usize,
    seed: u64,
    path: &str,
    bias: &str,
) -> PyResult<PyTable> {
    let s = system(system_name)?;
    let r = coordinate(rc)?;
    let p = CoefPath::from_name(path).map_or_else(|| value_err(format!("unknown path '{path}'")), Ok)?;
    let bias = match (bias, &s) {
        ("none", _) => None,
        ("torsion", MolecularSystem::Butane(b)) => Some(Bias::butane_torsion(b)),
        ("w3", MolecularSystem::ThreeAtom(t)) => Some(Bias::three_atom_barrier(t)),
        _ => return value_err(format!("bias '{bias}' does not apply to {system_name}")),
    };
    let d = CoefficientConfig::default();
    let cfg = CoefficientConfig { traj: TrajectoryConfig { steps, seed, ..d.traj }, realizations, bins, bias, ..d };
    let q0 = s.default_configuration();
    Ok(PyTable { t: cg::estimate_coefficients(&s, r, beta, &q0, &cfg, p).py()? })
}

/// Residence times of the full dynamics from states harvested in `start`.
#[pyfunction]
#[pyo3(signature = (system_name, rc, start, exit, n, beta = 1.0, dt = 1e-3, seed = 0))]
#[allow(clippy::too_many_arguments)]
fn full_residence_times<'py>(
    py: Python<'py>,
    system_name: &str,
    rc: &str,
    start: &str,
    exit: &str,
    n: usize,
    beta: f64,
    dt: f64,
    seed: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let s = system(system_name)?;
    let r = coordinate(rc)?;
    let hc = TrajectoryConfig { dt, steps: 0, seed, burn_in: 100_000, thinning: 1000, overflow_guard: 1e6 };
    let states = sde::harvest_well_samples(&s, r, beta, &Region::parse(start).py()?, n, &hc, &s.default_configuration()).py()?.states;
    let cfg = ResidenceConfig { dt, seed, ..Default::default() };
    let rep = sde::residence_times(&Dynamics::Full { system: &s, rc: r, beta }, Initials::Full(&states), &Region::parse(exit).py()?, &cfg).py()?;
    let d = residence_dict(py, rep)?;
    d.set_item("z0", states.iter().map(|q| r.value(q)).collect::<Vec<_>>())?;
    Ok(d)
}

/// Energy and gradient of a molecular system at q.
#[pyfunction]
fn energy(system_name: &str, q: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let s = system(system_name)?;
    if q.len() != s.dof() {
        return value_err(format!("{system_name} has {} coordinates", s.dof()));
    }
    let mut g = vec![0.0; q.len()];
    let e = s.energy_grad(&q, &mut g);
    Ok((e, g))
}

/// Value and gradient of a reaction coordinate at q.
#[pyfunction]
fn reaction_coordinate(rc: &str, q: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let r = coordinate(rc)?;
    if q.len() != r.dof() {
        return value_err(format!("{rc} needs {} coordinates", r.dof()));
    }
    let mut g = vec![0.0; q.len()];
    let v = r.eval(&q, &mut g);
    Ok((v, g))
}

/// Kramers estimate for a free energy sampled on a uniform grid z.
#[pyfunction]
fn kramers_time<'py>(py: Python<'py>, z: Vec<f64>, a: Vec<f64>, z_well: f64, z_sp: f64) -> PyResult<Bound<'py, PyDict>> {
    if z.len() < 3 || z.len() != a.len() {
        return value_err("z and a need equal lengths of at least 3".into());
    }
    let g = UniformGrid::new(z[0], z[z.len() - 1], z.len()).py()?;
    kramers_dict(py, cg::kramers_time(&GridFunction::new(g, a, false).py()?, z_well, z_sp, None).py()?)
}

/// Kramers estimate for the three-atom angle potential W3 on [0.8, 2.4].
#[pyfunction]
fn kramers_w3(py: Python<'_>) -> PyResult<Bound<'_, PyDict>> {
    let t = ThreeAtom::default();
    let a = GridFunction::from_fn(UniformGrid::new(0.8, 2.4, 1601).py()?, |th| t.w3(th).0);
    kramers_dict(py, cg::kramers_time(&a, t.theta_saddle + t.delta_theta, t.theta_saddle, None).py()?)
}

/// Weighted fit ln tau = ln tau0 + s beta over (beta, tau, tau_err); returns (tau0, s).
#[pyfunction]
fn fit_arrhenius(points: Vec<(f64, f64, f64)>) -> PyResult<(f64, f64)> {
    let f = cg::fit_arrhenius(&points).py()?;
    Ok((f.tau0, f.s))
}

/// Fokker-Planck evolution of dz = b dt + sqrt(2/beta) sigma dW on a uniform
/// grid with reflecting (or periodic) boundaries. Returns (times, densities).
#[pyfunction]
#[pyo3(signature = (z, drift, sigma, beta, init, dt, t_final, record_every = 100, periodic = false))]
#[allow(clippy::too_many_arguments)]
fn solve_fp(
    z: Vec<f64>,
    drift: Vec<f64>,
    sigma: Vec<f64>,
    beta: f64,
    init: Vec<f64>,
    dt: f64,
    t_final: f64,
    record_every: usize,
    periodic: bool,
) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
    let n = z.len();
    if n < 3 || drift.len() != n || sigma.len() != n || init.len() != n {
        return value_err("z, drift, sigma and init need equal lengths of at least 3".into());
    }
    let g = if periodic {
        UniformGrid::with_step(z[0], (z[n - 1] - z[0]) / (n - 1) as f64, n)
    } else {
        UniformGrid::new(z[0], z[n - 1], n).py()?
    };
    let domain = if periodic { Domain::Periodic { lo: g.lo - 0.5 * g.step, period: g.step * n as f64 } } else { Domain::Reflect { lo: g.lo, hi: g.hi() } };
    let sde = Sde1d::new(Coef::Grid(GridFunction::new(g, drift, periodic).py()?), Coef::Grid(GridFunction::new(g, sigma, periodic).py()?), beta, domain).py()?;
    let tr = fp1d::solve_fp(&sde, &DensityGrid::new(g, init, periodic).py()?, dt, t_final, record_every).py()?;
    Ok((tr.times, tr.densities.into_iter().map(|d| d.values).collect()))
}

#[pymodule]
fn cgcore_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyChainNN>()?;
    m.add_class::<PyChainNNN>()?;
    m.add_class::<PyTable>()?;
    m.add_function(wrap_pyfunction!(estimate_coefficients, m)?)?;
    m.add_function(wrap_pyfunction!(full_residence_times, m)?)?;
    m.add_function(wrap_pyfunction!(energy, m)?)?;
    m.add_function(wrap_pyfunction!(reaction_coordinate, m)?)?;
    m.add_function(wrap_pyfunction!(kramers_time, m)?)?;
    m.add_function(wrap_pyfunction!(kramers_w3, m)?)?;
    m.add_function(wrap_pyfunction!(fit_arrhenius, m)?)?;
    m.add_function(wrap_pyfunction!(solve_fp, m)?)?;
    Ok(())
}
