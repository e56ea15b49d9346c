//! Least-squares fits reported by the scans.

use serde::Serialize;

use crate::error::{invalid, Result};

/// Minimum number of points before a fit is reported.
pub const MIN_FIT_POINTS: usize = 4;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitResult {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in the fitted coordinates.
    pub residual: f64,
    pub n_points: usize,
    pub x_range: (f64, f64),
}

impl FitResult {
    pub fn predict(&self, x: f64) -> f64 {
        self.intercept + self.slope * x
    }
}

/// Ordinary least squares `y ≈ a·x + b`, returned as `(a, b)`.
pub fn least_squares(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return (0.0, my);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

pub fn linear_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    if points.len() < MIN_FIT_POINTS {
        return invalid(format!("a fit needs at least {MIN_FIT_POINTS} points, got {}", points.len()));
    }
    if points.iter().any(|p| !p.0.is_finite() || !p.1.is_finite()) {
        return invalid("fit data contains non-finite values");
    }
    let (slope, intercept) = least_squares(points);
    let residual = rms(points.iter().map(|&(x, y)| y - (intercept + slope * x)));
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(FitResult { slope, intercept, residual, n_points: points.len(), x_range: (lo, hi) })
}

/// Fits `ln(1 + y) ≈ a·x + b`; the residual is measured back in `y` units.
pub fn exponential_fit(points: &[(f64, f64)]) -> Result<FitResult> {
    let logged: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x, (1.0 + y).ln())).collect();
    let mut fit = linear_fit(&logged)?;
    fit.residual = rms(points.iter().map(|&(x, y)| y - (fit.predict(x).exp() - 1.0)));
    Ok(fit)
}

/// Points sorted by `x` where `y` exceeds every earlier value, led by the first point.
///
/// For a staircase such as an integer radius sampled on a time grid these are
/// the arrival events, which carry no rounding error in `y`.
pub fn records(points: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out: Vec<(f64, f64)> = Vec::new();
    for p in sorted {
        if out.last().map_or(true, |q| p.1 > q.1) {
            out.push(p);
        }
    }
    out
}

pub fn rms(values: impl Iterator<Item = f64>) -> f64 {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v * v, n + 1));
    if n == 0 {
        0.0
    } else {
        (sum / n as f64).sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn records_keep_arrivals() {
        let pts = [(0.2, 1.0), (0.0, 0.0), (0.1, 0.0), (0.3, 1.0), (0.4, 3.0), (0.5, 2.0)];
        assert_eq!(records(&pts), vec![(0.0, 0.0), (0.2, 1.0), (0.4, 3.0)]);
        assert!(records(&[]).is_empty());
    }

    #[test]
    fn exact_line_has_zero_residual() {
        let pts: Vec<(f64, f64)> = (0..6).map(|i| (i as f64, 2.0 * i as f64 + 1.0)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
        assert!((f.intercept - 1.0).abs() < 1e-12);
        assert!(f.residual < 1e-12);
        assert_eq!(f.x_range, (0.0, 5.0));
    }

    #[test]
    fn too_few_points() {
        assert!(linear_fit(&[(0.0, 1.0), (1.0, 2.0), (2.0, 3.0)]).is_err());
    }

    #[test]
    fn exponential_data_prefers_exponential_model() {
        let pts: Vec<(f64, f64)> = (0..8).map(|i| (i as f64 * 0.5, (0.8 * i as f64 * 0.5).exp() - 1.0)).collect();
        let lin = linear_fit(&pts).unwrap();
        let exp = exponential_fit(&pts).unwrap();
        assert!(exp.residual < 1e-10);
        assert!(lin.residual > exp.residual);
    }
}
