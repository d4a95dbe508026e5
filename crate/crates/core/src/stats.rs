//! Small statistics helpers.

use statrs::distribution::{ContinuousCDF, StudentsT};

pub const Z95: f64 = 1.96;

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance.
pub fn variance(x: &[f64]) -> f64 {
    let n = x.len();
    if n < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1) as f64
}

/// Mean and 1.96 * standard error.
pub fn mean_ci(x: &[f64]) -> (f64, f64) {
    (mean(x), Z95 * (variance(x) / x.len() as f64).sqrt())
}

/// Mean and Student-t 95% half width, for a small number of independent replicas.
pub fn mean_ci_t(x: &[f64]) -> (f64, f64) {
    let n = x.len();
    let q = t_quantile_975(n.saturating_sub(1));
    (mean(x), q * (variance(x) / n as f64).sqrt())
}

pub fn t_quantile_975(dof: usize) -> f64 {
    t_quantile(0.975, dof)
}

/// Quantile of the standard Student-t distribution.
pub fn t_quantile(p: f64, dof: usize) -> f64 {
    if dof == 0 {
        return f64::INFINITY;
    }
    StudentsT::new(0.0, 1.0, dof as f64)
        .map(|t| t.inverse_cdf(p))
        .unwrap_or(Z95)
}

/// Batch means: splits the series into `n_batches` contiguous blocks and
/// returns (mean, 1.96 * stderr of the block means, block means).
pub fn batch_means(x: &[f64], n_batches: usize) -> (f64, f64, Vec<f64>) {
    let b = x.len() / n_batches.max(1);
    let means: Vec<f64> = (0..n_batches).map(|k| mean(&x[k * b..(k + 1) * b])).collect();
    let (m, hw) = mean_ci(&means);
    (m, hw, means)
}

/// Empirical quantile with linear interpolation; `sorted` must be ascending.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let h = p.clamp(0.0, 1.0) * (n - 1) as f64;
    let i = (h.floor() as usize).min(n - 2);
    let t = h - i as f64;
    sorted[i] * (1.0 - t) + sorted[i + 1] * t
}

/// Linear least squares fit y = a + b x with weights; returns (a, b, se_a, se_b).
pub fn weighted_line_fit(x: &[f64], y: &[f64], w: &[f64]) -> (f64, f64, f64, f64) {
    let sw: f64 = w.iter().sum();
    let sx: f64 = w.iter().zip(x).map(|(w, x)| w * x).sum();
    let sy: f64 = w.iter().zip(y).map(|(w, y)| w * y).sum();
    let sxx: f64 = w.iter().zip(x).map(|(w, x)| w * x * x).sum();
    let sxy: f64 = w.iter().zip(x).zip(y).map(|((w, x), y)| w * x * y).sum();
    let det = sw * sxx - sx * sx;
    let b = (sw * sxy - sx * sy) / det;
    let a = (sy - b * sx) / sw;
    (a, b, (sxx / det).sqrt(), (sw / det).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_exact() {
        let x = [1.0, 2.0, 3.0, 4.0];
        let y: Vec<f64> = x.iter().map(|x| 0.5 + 2.0 * x).collect();
        let (a, b, _, _) = weighted_line_fit(&x, &y, &[1.0, 2.0, 1.0, 3.0]);
        assert!((a - 0.5).abs() < 1e-12 && (b - 2.0).abs() < 1e-12);
    }

    #[test]
    fn quantiles() {
        let v = [0.0, 1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile_sorted(&v, 0.5), 2.0);
        assert!((quantile_sorted(&v, 0.1) - 0.4).abs() < 1e-12);
    }

    #[test]
    fn t_quantile_matches_table() {
        assert!((t_quantile_975(9) - 2.262).abs() < 1e-3);
        assert!((t_quantile_975(1000) - 1.962).abs() < 1e-3);
    }
}
