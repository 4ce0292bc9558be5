//! Small numerical helpers shared across modules.

use std::sync::OnceLock;

use libm::erfc;
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Compensated (Neumaier) summation.
pub fn neumaier_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Adaptive Simpson quadrature with a relative tolerance on the total.
pub fn adaptive_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    const MAX_DEPTH: u32 = 48;
    let fa = f(a);
    let fb = f(b);
    let mid = 0.5 * (a + b);
    let fm = f(mid);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    // a crude absolute scale to turn the relative target into per-panel targets
    let scale = whole.abs().max(f64::MIN_POSITIVE);
    let mut failed = false;
    let floor = rel_tol * scale;
    let value = simpson_step(&f, a, b, fa, fm, fb, whole, floor, floor, MAX_DEPTH, &mut failed);
    if failed || !value.is_finite() {
        return Err(Error::Quadrature {
            tolerance: rel_tol,
            estimate: value,
        });
    }
    Ok(value)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step(
    f: &impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    total_tol: f64,
    depth: u32,
    failed: &mut bool,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    if depth == 0 {
        // panels this narrow only matter if they still carry a visible error
        *failed |= delta.abs() > 15.0 * total_tol;
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, total_tol, depth - 1, failed)
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, total_tol, depth - 1, failed)
}

/// Composite Simpson rule on `intervals` (even) panels.
pub fn composite_simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, intervals: usize) -> f64 {
    let n = intervals + intervals % 2;
    let h = (b - a) / n as f64;
    let terms = (0..=n).map(|i| {
        let w = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w * f(a + i as f64 * h)
    });
    neumaier_sum(terms) * h / 3.0
}

/// Gauss-Legendre nodes and weights on [-1, 1], 16 points.
pub fn gauss_legendre16() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

fn gauss_legendre(n: usize) -> Vec<(f64, f64)> {
    let mut rule = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        rule.push((x, 2.0 / ((1.0 - x * x) * dp * dp)));
    }
    rule
}

/// `P(a < Z < b)` for a standard normal `Z`, accurate in both tails.
pub fn normal_mass(a: f64, b: f64) -> f64 {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    if a >= 0.0 {
        0.5 * (erfc(a * s) - erfc(b * s))
    } else if b <= 0.0 {
        0.5 * (erfc(-b * s) - erfc(-a * s))
    } else {
        1.0 - 0.5 * (erfc(-a * s) + erfc(b * s))
    }
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Ordinary least squares line `y = slope * x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::Insufficient(format!(
            "linear fit needs >= 2 paired points, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Insufficient("linear fit with identical abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
    })
}

/// Least-squares coefficients for `design * coef ~ y` (SVD, rank tolerant)
/// and the relative residual `|design * coef - y| / |y|`.
pub fn least_squares(design: &[Vec<f64>], y: &[f64]) -> Result<(Vec<f64>, f64)> {
    let rows = design.len();
    let cols = design.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || rows != y.len() {
        return Err(Error::Insufficient("empty least-squares system".into()));
    }
    let a = DMatrix::from_fn(rows, cols, |i, j| design[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.clone().svd(true, true);
    let coef = svd
        .solve(&b, 1e-12)
        .map_err(|e| Error::Insufficient(format!("least squares failed: {e}")))?;
    let resid = (&a * &coef - &b).norm();
    let scale = b.norm();
    let rel = if scale > 0.0 { resid / scale } else { resid };
    Ok((coef.iter().copied().collect(), rel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn simpson_integrates_sqrt_endpoint() {
        let v = adaptive_simpson(|x| (1.0 - x * x).max(0.0).sqrt(), -1.0, 1.0, 1e-10).unwrap();
        assert_relative_eq!(v, std::f64::consts::FRAC_PI_2, max_relative = 1e-9);
    }

    #[test]
    fn gauss_legendre_is_exact_for_degree_31() {
        let v: f64 = gauss_legendre16().iter().map(|(x, w)| w * x.powi(30)).sum();
        assert_relative_eq!(v, 2.0 / 31.0, max_relative = 1e-13);
        let total: f64 = gauss_legendre16().iter().map(|(_, w)| w).sum();
        assert_relative_eq!(total, 2.0, max_relative = 1e-14);
    }

    #[test]
    fn normal_mass_tails() {
        assert_relative_eq!(normal_mass(-1.0, 1.0), 0.682_689_492_137_085_9, max_relative = 1e-13);
        let far = normal_mass(10.0, 11.0);
        assert!(far > 0.0 && far < 1e-22);
        assert_relative_eq!(normal_mass(-11.0, -10.0), far, max_relative = 1e-12);
    }

    #[test]
    fn fit_recovers_line() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| -1.5 * x + 0.25).collect();
        let fit = linear_fit(&xs, &ys).unwrap();
        assert_relative_eq!(fit.slope, -1.5, epsilon = 1e-14);
        assert_relative_eq!(fit.intercept, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn least_squares_exact_system() {
        let design = vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]];
        let (c, r) = least_squares(&design, &[2.0, 3.0, 5.0]).unwrap();
        assert_relative_eq!(c[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(c[1], 3.0, epsilon = 1e-12);
        assert!(r < 1e-12);
    }

    #[test]
    fn neumaier_recovers_cancellation() {
        let v = neumaier_sum([1.0, 1e100, 1.0, -1e100]);
        assert_eq!(v, 2.0);
    }
}
