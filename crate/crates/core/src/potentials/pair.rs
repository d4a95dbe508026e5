//! One-dimensional pair interactions.

/// Result of evaluating a pair potential.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PairEval {
    Finite { value: f64, derivative: f64 },
    /// Argument lies in the excluded region of a hard-wall potential.
    Wall,
}

impl PairEval {
    pub fn value(&self) -> f64 {
        match *self {
            PairEval::Finite { value, .. } => value,
            PairEval::Wall => f64::INFINITY,
        }
    }
    pub fn derivative(&self) -> f64 {
        match *self {
            PairEval::Finite { derivative, .. } => derivative,
            PairEval::Wall => f64::NAN,
        }
    }
    pub fn is_wall(&self) -> bool {
        matches!(self, PairEval::Wall)
    }
    pub fn finite(&self) -> Option<f64> {
        match *self {
            PairEval::Finite { value, .. } => Some(value),
            PairEval::Wall => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum PairPotential {
    /// (y - a)^2 / 2
    Quadratic { a: f64 },
    /// (y - 1)^4 / 2 + y^2 / 2
    QuarticW1,
    /// (y - 2.1)^4 / 4
    QuarticW2,
    /// sum_k c_k y^k
    Polynomial(Vec<f64>),
    /// inner potential for y >= 0, +infinity for y < 0
    HardWall(Box<PairPotential>),
}

impl PairPotential {
    pub fn zero() -> Self {
        PairPotential::Polynomial(vec![0.0])
    }

    /// Parses "quadratic:a", "paper-quartic-W1", "paper-quartic-W2",
    /// "polynomial:c0,c1,...", "zero", with an optional "hard-wall:" prefix.
    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("hard-wall:") {
            return Self::parse(rest).map(|p| PairPotential::HardWall(Box::new(p)));
        }
        match s {
            "paper-quartic-W1" | "W1" => return Some(PairPotential::QuarticW1),
            "paper-quartic-W2" | "W2" => return Some(PairPotential::QuarticW2),
            "zero" => return Some(Self::zero()),
            "quadratic" => return Some(PairPotential::Quadratic { a: 0.0 }),
            _ => {}
        }
        if let Some(a) = s.strip_prefix("quadratic:") {
            return a.trim().parse().ok().map(|a| PairPotential::Quadratic { a });
        }
        if let Some(c) = s.strip_prefix("polynomial:") {
            let coeffs: Option<Vec<f64>> = c.split(',').map(|v| v.trim().parse().ok()).collect();
            return coeffs.filter(|v| !v.is_empty()).map(PairPotential::Polynomial);
        }
        None
    }

    pub fn name(&self) -> String {
        match self {
            PairPotential::Quadratic { a } => format!("quadratic:{a}"),
            PairPotential::QuarticW1 => "paper-quartic-W1".into(),
            PairPotential::QuarticW2 => "paper-quartic-W2".into(),
            PairPotential::Polynomial(c) => {
                let v: Vec<String> = c.iter().map(|x| x.to_string()).collect();
                format!("polynomial:{}", v.join(","))
            }
            PairPotential::HardWall(p) => format!("hard-wall:{}", p.name()),
        }
    }

    pub fn has_wall(&self) -> bool {
        matches!(self, PairPotential::HardWall(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, PairPotential::Polynomial(c) if c.iter().all(|&v| v == 0.0))
    }

    pub fn eval(&self, y: f64) -> PairEval {
        match self {
            PairPotential::HardWall(inner) => {
                if y < 0.0 {
                    PairEval::Wall
                } else {
                    inner.eval(y)
                }
            }
            _ => {
                let (value, derivative, _) = self.smooth(y);
                PairEval::Finite { value, derivative }
            }
        }
    }

    /// Value of the potential, +infinity inside a wall.
    #[inline]
    pub fn value(&self, y: f64) -> f64 {
        self.eval(y).value()
    }

    #[inline]
    pub fn derivative(&self, y: f64) -> f64 {
        self.eval(y).derivative()
    }

    pub fn second_derivative(&self, y: f64) -> f64 {
        match self {
            PairPotential::HardWall(inner) => inner.second_derivative(y),
            _ => self.smooth(y).2,
        }
    }

    fn smooth(&self, y: f64) -> (f64, f64, f64) {
        match self {
            PairPotential::Quadratic { a } => {
                let d = y - a;
                (0.5 * d * d, d, 1.0)
            }
            PairPotential::QuarticW1 => {
                let d = y - 1.0;
                let d2 = d * d;
                (0.5 * d2 * d2 + 0.5 * y * y, 2.0 * d2 * d + y, 6.0 * d2 + 1.0)
            }
            PairPotential::QuarticW2 => {
                let d = y - 2.1;
                let d2 = d * d;
                (0.25 * d2 * d2, d2 * d, 3.0 * d2)
            }
            PairPotential::Polynomial(c) => {
                let (mut v, mut dv, mut d2v) = (0.0, 0.0, 0.0);
                for &ck in c.iter().rev() {
                    d2v = d2v * y + dv * 2.0;
                    dv = dv * y + v;
                    v = v * y + ck;
                }
                (v, dv, d2v)
            }
            PairPotential::HardWall(inner) => inner.smooth(y),
        }
    }

    /// Location of the global minimum, by scanning [-20, 20] and refining
    /// with golden-section search.
    pub fn argmin(&self) -> f64 {
        if let PairPotential::Quadratic { a } = self {
            return *a;
        }
        let (lo, hi, n) = (-20.0, 20.0, 8001);
        let h = (hi - lo) / (n - 1) as f64;
        let mut best = (f64::INFINITY, 0.0);
        for i in 0..n {
            let y = lo + i as f64 * h;
            let v = self.value(y);
            if v < best.0 {
                best = (v, y);
            }
        }
        golden_min(|y| self.value(y), best.1 - h, best.1 + h)
    }
}

pub(crate) fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..200 {
        if (b - a).abs() < 1e-14 * (1.0 + a.abs()) {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
