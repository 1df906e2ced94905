//! Small statistics helpers shared by the analytics and the harness.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Sample mean and standard error of the mean.
pub fn mean_sem(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Weighted least-squares line `y = intercept + slope x`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub slope_err: f64,
    pub intercept_err: f64,
    /// `sum w (y - fit)^2`; a chi-square when `w = 1/sigma^2`.
    pub chi2: f64,
    pub dof: usize,
    pub r2: f64,
}

impl LineFit {
    /// Upper-tail probability of `chi2` with `dof` degrees of freedom.
    pub fn p_value(&self) -> f64 {
        if self.dof == 0 {
            return 1.0;
        }
        match ChiSquared::new(self.dof as f64) {
            Ok(d) => 1.0 - d.cdf(self.chi2),
            Err(_) => f64::NAN,
        }
    }
}

/// Fits a line; `weights` defaults to 1. Returns `None` for fewer than
/// two distinct abscissae.
pub fn linear_fit(xs: &[f64], ys: &[f64], weights: Option<&[f64]>) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let w = |i: usize| weights.map_or(1.0, |w| w[i]);
    let (mut sw, mut sx, mut sy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        sw += w(i);
        sx += w(i) * xs[i];
        sy += w(i) * ys[i];
    }
    let (mx, my) = (sx / sw, sy / sw);
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for i in 0..n {
        let (dx, dy) = (xs[i] - mx, ys[i] - my);
        sxx += w(i) * dx * dx;
        sxy += w(i) * dx * dy;
        syy += w(i) * dy * dy;
    }
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let chi2: f64 = (0..n).map(|i| w(i) * (ys[i] - intercept - slope * xs[i]).powi(2)).sum();
    let dof = n - 2;
    // With explicit weights the errors are absolute; otherwise scale by
    // the residual variance.
    let scale = if weights.is_some() {
        1.0
    } else if dof > 0 {
        chi2 / dof as f64
    } else {
        0.0
    };
    let slope_err = (scale / sxx).sqrt();
    let intercept_err = (scale * (1.0 / sw + mx * mx / sxx)).sqrt();
    let r2 = if syy > 0.0 { 1.0 - chi2 / syy } else { 1.0 };
    Some(LineFit {
        slope,
        intercept,
        slope_err,
        intercept_err,
        chi2,
        dof,
        r2,
    })
}

/// Slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    linear_fit(&lx, &ly, None).map(|f| f.slope)
}

/// Weighted quadratic `y = a + b x + c x^2`; returns `(c, stderr(c))`.
/// Needs at least four points.
pub fn quadratic_curvature(xs: &[f64], ys: &[f64], weights: &[f64]) -> Option<(f64, f64)> {
    let n = xs.len();
    if n < 4 || ys.len() != n || weights.len() != n {
        return None;
    }
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for i in 0..n {
        let row = Vector3::new(1.0, xs[i], xs[i] * xs[i]);
        normal += weights[i] * row * row.transpose();
        rhs += weights[i] * ys[i] * row;
    }
    let cov = normal.try_inverse()?;
    let coef = cov * rhs;
    Some((coef[2], cov[(2, 2)].sqrt()))
}

/// Bisection for a sign change of `f` on `[lo, hi]`; stops when the
/// bracket is below `tol` or stops shrinking.
pub fn bisect(mut lo: f64, mut hi: f64, tol: f64, mut f: impl FnMut(f64) -> f64) -> Option<f64> {
    let (mut flo, fhi) = (f(lo), f(hi));
    if flo == 0.0 {
        return Some(lo);
    }
    if fhi == 0.0 {
        return Some(hi);
    }
    if !(flo.signum() != fhi.signum()) || flo.is_nan() || fhi.is_nan() {
        return None;
    }
    for _ in 0..4000 {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= tol || mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Some(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}
