//! Least-squares slopes of `log(error)` against `log(dt)`.

use crate::error::{Result, SdcError};

/// Points below this are treated as saturated by rounding.
pub const SATURATION_LOW: f64 = 1e-12;
/// Points above this are treated as outside the asymptotic regime.
pub const SATURATION_HIGH: f64 = 1e2;
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root mean square of the residuals.
    pub residual: f64,
    /// Standard error of the slope.
    pub slope_stderr: f64,
    pub points: usize,
}

/// Ordinary least squares `y = slope * x + intercept`.
pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LineFit> {
    let n = x.len();
    if n != y.len() || n < 2 {
        return Err(SdcError::InvalidArgument(format!("line fit needs two or more points, got {n}")));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(SdcError::InvalidArgument("line fit needs distinct abscissae".into()));
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = x.iter().zip(y).map(|(a, b)| (b - slope * a - intercept).powi(2)).sum();
    let slope_stderr = if n > 2 { (ss / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LineFit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
        slope_stderr,
        points: n,
    })
}

/// Convergence order from `(dt, error)` pairs, skipping saturated or non-finite errors.
///
/// With `max_points > 0` only that many of the smallest remaining steps enter the fit,
/// which keeps the pre-asymptotic end of a wide ladder out of the slope.
pub fn fit_order(dts: &[f64], errors: &[f64], max_points: usize) -> Result<LineFit> {
    let mut kept: Vec<(f64, f64)> = dts
        .iter()
        .zip(errors)
        .filter(|(_, &e)| e.is_finite() && (SATURATION_LOW..=SATURATION_HIGH).contains(&e))
        .map(|(&h, &e)| (h, e))
        .collect();
    if max_points > 0 && kept.len() > max_points {
        kept.sort_by(|a, b| a.0.total_cmp(&b.0));
        kept.truncate(max_points);
    }
    let (x, y): (Vec<f64>, Vec<f64>) = kept.iter().map(|&(h, e)| (h.ln(), e.ln())).unzip();
    if x.len() < MIN_FIT_POINTS {
        return Err(SdcError::InvalidArgument(format!(
            "order fit needs {MIN_FIT_POINTS} unsaturated points, got {}",
            x.len()
        )));
    }
    fit_line(&x, &y)
}
