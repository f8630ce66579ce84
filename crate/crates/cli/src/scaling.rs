//! Least-squares power laws in log-log coordinates.

use crate::error::CliError;
use crate::report::ResultRow;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScalingFit {
    pub slope: f64,
    /// Natural-log intercept.
    pub intercept: f64,
    /// Largest absolute deviation of `ln y` from the fitted line.
    pub residual: f64,
}

/// OLS of `ln y` on `ln x`.
pub fn fit_loglog(xs: &[f64], ys: &[f64]) -> Result<ScalingFit, CliError> {
    let invalid = |reason: String| CliError::Validation {
        field: "rows".into(),
        reason,
    };
    if xs.len() != ys.len() || xs.len() < 3 {
        return Err(invalid(format!("need at least 3 paired rows, got {}", xs.len().min(ys.len()))));
    }
    if let Some(v) = xs.iter().chain(ys).find(|v| !(v.is_finite() && **v > 0.0)) {
        return Err(invalid(format!("values must be positive, got {v}")));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxx: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(invalid("x values must not all coincide".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = lx
        .iter()
        .zip(&ly)
        .map(|(x, y)| (y - intercept - slope * x).abs())
        .fold(0.0, f64::max);
    Ok(ScalingFit {
        slope,
        intercept,
        residual,
    })
}

/// [`fit_loglog`] on two numeric columns of report rows.
pub fn fit_scaling(rows: &[ResultRow], x_col: &str, y_col: &str) -> Result<ScalingFit, CliError> {
    let column = |name: &str| -> Result<Vec<f64>, CliError> {
        rows.iter()
            .map(|r| {
                r.column(name).ok_or_else(|| CliError::Validation {
                    field: name.to_string(),
                    reason: "not a numeric column".into(),
                })
            })
            .collect()
    };
    fit_loglog(&column(x_col)?, &column(y_col)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0, 16.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 7.0 * x.powi(-2)).collect();
        let fit = fit_loglog(&xs, &ys).unwrap();
        assert!((fit.slope + 2.0).abs() < 1e-12);
        assert!((fit.intercept - 7f64.ln()).abs() < 1e-12);
        assert!(fit.residual < 1e-12);
    }

    #[test]
    fn constant_has_zero_slope() {
        let fit = fit_loglog(&[1.0, 3.0, 9.0], &[2.5, 2.5, 2.5]).unwrap();
        assert_eq!(fit.slope, 0.0);
    }

    #[test]
    fn rejects_nonpositive_and_short() {
        assert!(fit_loglog(&[1.0, 2.0, 3.0], &[1.0, 0.0, 1.0]).is_err());
        assert!(fit_loglog(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    }
}
