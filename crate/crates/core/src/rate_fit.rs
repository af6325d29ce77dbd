//! Convergence-rate fits on learning curves.
//!
//! Both fits are ordinary least squares on a transformed curve. Points with a
//! non-positive error cannot be logged; they are dropped and counted in
//! [`RateFit::excluded`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// Points used in the fit.
    pub n_points: usize,
    /// Points dropped because their error was not positive.
    pub excluded: usize,
}

/// OLS fit of `y = intercept + slope * x`.
pub fn ols(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return Err(Error::InsufficientData(format!("need at least 2 points, got {n}")));
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all abscissae are equal".into()));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    let ss_res: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let r = y - intercept - slope * x;
            r * r
        })
        .sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        (1.0 - ss_res / ss_tot).clamp(0.0, 1.0)
    };
    Ok((slope, intercept, r_squared))
}

fn fit_log_error(pairs: &[(f64, f64)], log_x: bool) -> Result<RateFit> {
    if let Some((n, _)) = pairs.iter().find(|(n, _)| !(*n > 0.0 && n.is_finite())) {
        return Err(Error::InvalidArgument(format!("sample sizes must be positive, got {n}")));
    }
    let kept: Vec<(f64, f64)> = pairs
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|&(n, e)| (if log_x { n.ln() } else { n }, e.ln()))
        .collect();
    let excluded = pairs.len() - kept.len();
    if kept.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} positive error values, need at least 2 ({excluded} excluded)",
            kept.len()
        )));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = kept.into_iter().unzip();
    let (slope, intercept, r_squared) = ols(&xs, &ys)?;
    Ok(RateFit {
        slope,
        intercept,
        r_squared,
        n_points: xs.len(),
        excluded,
    })
}

/// Fits `log error = intercept + slope * log n`, i.e. `error ~ n^slope`.
pub fn loglog_slope(pairs: &[(f64, f64)]) -> Result<RateFit> {
    fit_log_error(pairs, true)
}

/// Fits `log error = intercept + slope * n`, i.e. `error ~ e^{slope n}`.
pub fn exp_decay_fit(pairs: &[(f64, f64)]) -> Result<RateFit> {
    fit_log_error(pairs, false)
}
