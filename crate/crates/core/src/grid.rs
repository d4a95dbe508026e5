//! Uniform grids, piecewise-linear grid functions and basic quadrature.

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UniformGrid {
    pub lo: f64,
    pub step: f64,
    pub n: usize,
}

impl UniformGrid {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if n < 2 || !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return invalid(format!("grid needs n >= 2 and lo < hi (got {lo}, {hi}, {n})"));
        }
        Ok(UniformGrid { lo, step: (hi - lo) / (n - 1) as f64, n })
    }

    pub fn with_step(lo: f64, step: f64, n: usize) -> Self {
        UniformGrid { lo, step, n }
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        self.lo + i as f64 * self.step
    }

    pub fn hi(&self) -> f64 {
        self.node(self.n - 1)
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node(i)).collect()
    }

    /// Composite trapezoid weights.
    pub fn trapezoid_weights(&self) -> Vec<f64> {
        let mut w = vec![self.step; self.n];
        w[0] *= 0.5;
        w[self.n - 1] *= 0.5;
        w
    }

    /// Composite Simpson weights; needs an odd number of nodes.
    pub fn simpson_weights(&self) -> Vec<f64> {
        assert!(self.n % 2 == 1, "Simpson rule needs an odd node count");
        let h = self.step / 3.0;
        (0..self.n)
            .map(|i| {
                if i == 0 || i == self.n - 1 {
                    h
                } else if i % 2 == 1 {
                    4.0 * h
                } else {
                    2.0 * h
                }
            })
            .collect()
    }
}

/// Values on a uniform grid, evaluated by linear interpolation.
/// Non-periodic functions are clamped to the end values outside the grid;
/// periodic ones wrap with period `n * step`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    pub grid: UniformGrid,
    pub values: Vec<f64>,
    pub periodic: bool,
}

impl GridFunction {
    pub fn new(grid: UniformGrid, values: Vec<f64>, periodic: bool) -> Result<Self> {
        if values.len() != grid.n {
            return invalid("grid function length does not match the grid");
        }
        Ok(GridFunction { grid, values, periodic })
    }

    pub fn from_fn(grid: UniformGrid, f: impl Fn(f64) -> f64) -> Self {
        let values = (0..grid.n).map(|i| f(grid.node(i))).collect();
        GridFunction { grid, values, periodic: false }
    }

    #[inline]
    pub fn eval(&self, z: f64) -> f64 {
        let g = &self.grid;
        let n = g.n;
        let t = (z - g.lo) / g.step;
        if self.periodic {
            let t = t.rem_euclid(n as f64);
            let i = (t.floor() as usize).min(n - 1);
            let f = t - i as f64;
            let j = if i + 1 == n { 0 } else { i + 1 };
            return self.values[i] * (1.0 - f) + self.values[j] * f;
        }
        if t <= 0.0 {
            return self.values[0];
        }
        if t >= (n - 1) as f64 {
            return self.values[n - 1];
        }
        let i = t.floor() as usize;
        let f = t - i as f64;
        self.values[i] * (1.0 - f) + self.values[i + 1] * f
    }

    /// Centered differences, one-sided at the ends (wrapped when periodic).
    pub fn derivative(&self) -> GridFunction {
        GridFunction { grid: self.grid, values: derivative(&self.values, self.grid.step, self.periodic), periodic: self.periodic }
    }
}

pub fn derivative(v: &[f64], h: f64, periodic: bool) -> Vec<f64> {
    let n = v.len();
    (0..n)
        .map(|i| {
            if periodic {
                (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * h)
            } else if i == 0 {
                (v[1] - v[0]) / h
            } else if i == n - 1 {
                (v[n - 1] - v[n - 2]) / h
            } else {
                (v[i + 1] - v[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

/// Trapezoid integral of samples with spacing h.
pub fn trapezoid(v: &[f64], h: f64) -> f64 {
    let n = v.len();
    if n < 2 {
        return 0.0;
    }
    h * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[n - 1]))
}

/// Cumulative trapezoid integral, starting at zero.
pub fn cumulative_trapezoid(v: &[f64], h: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(v.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in v.windows(2) {
        acc += 0.5 * h * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Local quadratic least-squares fit through points; returns (c0, c1, c2) of
/// c0 + c1 (x - x0) + c2 (x - x0)^2.
pub fn quadratic_fit(x: &[f64], y: &[f64], x0: f64) -> (f64, f64, f64) {
    let c = poly_fit(x, y, x0, 2);
    (c[0], c[1], c[2])
}

/// Least-squares polynomial sum_k c_k (x - x0)^k of the given degree.
pub fn poly_fit(x: &[f64], y: &[f64], x0: f64, degree: usize) -> Vec<f64> {
    let m = degree + 1;
    let mut a = vec![vec![0.0; m]; m];
    let mut r = vec![0.0; m];
    for (&xi, &yi) in x.iter().zip(y) {
        let d = xi - x0;
        let p: Vec<f64> = (0..m).map(|k| d.powi(k as i32)).collect();
        for j in 0..m {
            r[j] += p[j] * yi;
            for k in 0..m {
                a[j][k] += p[j] * p[k];
            }
        }
    }
    for col in 0..m {
        let piv = (col..m).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, piv);
        r.swap(col, piv);
        for row in col + 1..m {
            let f = a[row][col] / a[col][col];
            for k in col..m {
                a[row][k] -= f * a[col][k];
            }
            r[row] -= f * r[col];
        }
    }
    let mut c = vec![0.0; m];
    for row in (0..m).rev() {
        let s: f64 = (row + 1..m).map(|k| a[row][k] * c[k]).sum();
        c[row] = (r[row] - s) / a[row][row];
    }
    c
}

/// Solves a tridiagonal system in place (Thomas algorithm).
/// `a` is the sub-diagonal (a[0] unused), `c` the super-diagonal (c[n-1] unused).
pub fn solve_tridiagonal(a: &[f64], b: &[f64], c: &[f64], d: &mut [f64]) {
    let n = b.len();
    let mut cp = vec![0.0; n];
    let mut beta = b[0];
    d[0] /= beta;
    for i in 1..n {
        cp[i - 1] = c[i - 1] / beta;
        beta = b[i] - a[i] * cp[i - 1];
        d[i] = (d[i] - a[i] * d[i - 1]) / beta;
    }
    for i in (0..n - 1).rev() {
        d[i] -= cp[i] * d[i + 1];
    }
}

/// Cyclic tridiagonal solve via Sherman-Morrison; `alpha` couples the last row
/// to the first column and `gamma` the first row to the last column.
pub fn solve_cyclic_tridiagonal(a: &[f64], b: &[f64], c: &[f64], alpha: f64, gamma: f64, d: &mut [f64]) {
    let n = b.len();
    let g = -b[0];
    let mut bb = b.to_vec();
    bb[0] -= g;
    bb[n - 1] -= alpha * gamma / g;
    solve_tridiagonal(a, &bb, c, d);
    let mut u = vec![0.0; n];
    u[0] = g;
    u[n - 1] = alpha;
    solve_tridiagonal(a, &bb, c, &mut u);
    let fact = (d[0] + gamma * d[n - 1] / g) / (1.0 + u[0] + gamma * u[n - 1] / g);
    for i in 0..n {
        d[i] -= fact * u[i];
    }
}

/// Natural-free cubic Hermite interpolation from values and slopes at uniform nodes.
#[derive(Clone, Debug)]
pub struct Hermite {
    pub grid: UniformGrid,
    pub y: Vec<f64>,
    pub dy: Vec<f64>,
}

impl Hermite {
    fn locate(&self, x: f64) -> (usize, f64) {
        let t = ((x - self.grid.lo) / self.grid.step).clamp(0.0, (self.grid.n - 1) as f64);
        let i = (t.floor() as usize).min(self.grid.n - 2);
        (i, t - i as f64)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h = self.grid.step;
        let (t2, t3) = (t * t, t * t * t);
        (2.0 * t3 - 3.0 * t2 + 1.0) * self.y[i]
            + (t3 - 2.0 * t2 + t) * h * self.dy[i]
            + (-2.0 * t3 + 3.0 * t2) * self.y[i + 1]
            + (t3 - t2) * h * self.dy[i + 1]
    }

    pub fn deriv(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h = self.grid.step;
        let t2 = t * t;
        ((6.0 * t2 - 6.0 * t) * self.y[i]
            + (6.0 * t - 6.0 * t2) * self.y[i + 1]) / h
            + (3.0 * t2 - 4.0 * t + 1.0) * self.dy[i]
            + (3.0 * t2 - 2.0 * t) * self.dy[i + 1]
    }

    pub fn deriv2(&self, x: f64) -> f64 {
        let (i, t) = self.locate(x);
        let h = self.grid.step;
        ((12.0 * t - 6.0) * self.y[i] + (6.0 - 12.0 * t) * self.y[i + 1]) / (h * h)
            + ((6.0 * t - 4.0) * self.dy[i] + (6.0 * t - 2.0) * self.dy[i + 1]) / h
    }
}
