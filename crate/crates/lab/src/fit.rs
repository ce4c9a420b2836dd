//! Least-squares power-law fits and anchored reference curves.

use anyhow::{ensure, Result};
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
    /// Points dropped because a coordinate was not positive.
    pub excluded: usize,
}

/// Ordinary least squares through `(log10 x, log10 y)`.
pub fn fit_loglog_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .map(|(x, y)| (x.log10(), y.log10()))
        .collect();
    let excluded = points.len() - logs.len();
    if excluded > 0 {
        eprintln!("warning: {excluded} nonpositive point(s) excluded from the log-log fit");
    }
    ensure!(logs.len() >= 3, "need at least 3 positive points, have {}", logs.len());
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    ensure!(sxx > 0.0, "sweep values are all equal");
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        r2,
        excluded,
    })
}

/// `c x^exponent` through the anchor point `(x0, y0)`.
pub fn anchored_power(x0: f64, y0: f64, exponent: f64) -> impl Fn(f64) -> f64 {
    let c = y0 / x0.powf(exponent);
    move |x| c * x.powf(exponent)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let pts: Vec<(f64, f64)> = [20.0, 30.0, 50.0, 70.0].iter().map(|&x: &f64| (x, x.powf(-1.5))).collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((f.slope + 1.5).abs() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_has_zero_slope() {
        let f = fit_loglog_slope(&[(1.0, 2.0), (2.0, 2.0), (4.0, 2.0)]).unwrap();
        assert_eq!(f.slope, 0.0);
    }

    #[test]
    fn noisy_half_power() {
        let noise = [0.01, -0.01, 0.005, -0.008, 0.01, -0.002];
        let pts: Vec<(f64, f64)> = [20.0f64, 30.0, 40.0, 50.0, 60.0, 70.0]
            .iter()
            .zip(noise)
            .map(|(&x, e)| (x, x.powf(-0.5) * (1.0 + e)))
            .collect();
        let f = fit_loglog_slope(&pts).unwrap();
        assert!((-0.55..=-0.45).contains(&f.slope), "{}", f.slope);
    }

    #[test]
    fn nonpositive_points_are_excluded() {
        let f = fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.5), (4.0, 0.25), (8.0, 0.0)]).unwrap();
        assert_eq!(f.excluded, 1);
        assert!((f.slope + 1.0).abs() < 1e-12);
        assert!(fit_loglog_slope(&[(1.0, 1.0), (2.0, 0.0), (3.0, -1.0)]).is_err());
    }

    #[test]
    fn anchoring() {
        let f = anchored_power(20.0, 0.3, -0.5);
        assert!((f(20.0) - 0.3).abs() < 1e-15);
        assert!((f(80.0) - 0.15).abs() < 1e-15);
    }
}
