//! Experiment reports: labelled statistics with standard errors, log-log
//! slope fits, and Monte Carlo summary helpers.

use crate::error::{CoreError, Result};
use crate::scalar::Scalar;

/// One reported statistic.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow<T> {
    /// Name of the statistic (CSV `statistic` column).
    pub statistic: String,
    /// Hurst value the row refers to, if any.
    pub h: Option<T>,
    /// Second Hurst value for pairwise statistics, if any.
    pub h_prime: Option<T>,
    /// Value of the statistic.
    pub value: T,
    /// Monte Carlo standard error; `None` for deterministic rows or `n = 1`.
    pub std_err: Option<T>,
    /// Sample size behind the value (1 for deterministic rows).
    pub n: usize,
}

/// Least-squares fit of `ln y = slope·ln x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit<T> {
    /// Fitted slope.
    pub slope: T,
    /// Fitted intercept (in log space).
    pub intercept: T,
    /// Half-width of an approximate 95% confidence interval for the slope
    /// (2 residual standard errors of the slope; 0 for an exact fit).
    pub ci_half_width: T,
    /// Number of points fitted.
    pub n_points: usize,
}

/// Outcome of one experiment: rows of statistics plus provenance metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentReport<T> {
    /// Experiment name.
    pub experiment: String,
    /// Reported statistics in output order.
    pub rows: Vec<ReportRow<T>>,
    /// Provenance key-value pairs (config hash, seed root, ...).
    pub metadata: Vec<(String, String)>,
}

impl<T: Scalar> ExperimentReport<T> {
    /// Empty report for an experiment.
    pub fn new(experiment: impl Into<String>) -> Self {
        Self { experiment: experiment.into(), rows: Vec::new(), metadata: Vec::new() }
    }

    /// Adds a deterministic (non-Monte-Carlo) statistic.
    pub fn push_value(&mut self, statistic: impl Into<String>, h: Option<T>, value: T) {
        self.rows.push(ReportRow {
            statistic: statistic.into(),
            h,
            h_prime: None,
            value,
            std_err: None,
            n: 1,
        });
    }

    /// Adds a Monte Carlo statistic with its standard error.
    pub fn push_estimate(
        &mut self,
        statistic: impl Into<String>,
        h: Option<T>,
        h_prime: Option<T>,
        value: T,
        std_err: Option<T>,
        n: usize,
    ) {
        self.rows.push(ReportRow { statistic: statistic.into(), h, h_prime, value, std_err, n });
    }

    /// Adds a slope fit as a pair of rows (`<label>_slope`, `<label>_intercept`).
    pub fn push_slope(&mut self, label: &str, fit: &SlopeFit<T>) {
        self.rows.push(ReportRow {
            statistic: format!("{label}_slope"),
            h: None,
            h_prime: None,
            value: fit.slope,
            std_err: Some(fit.ci_half_width),
            n: fit.n_points,
        });
        self.rows.push(ReportRow {
            statistic: format!("{label}_intercept"),
            h: None,
            h_prime: None,
            value: fit.intercept,
            std_err: None,
            n: fit.n_points,
        });
    }

    /// Records a metadata pair.
    pub fn push_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.push((key.into(), value.into()));
    }

    /// Looks a row up by statistic name.
    pub fn find(&self, statistic: &str) -> Option<&ReportRow<T>> {
        self.rows.iter().find(|r| r.statistic == statistic)
    }
}

/// Sample mean and standard error of the mean (`None` if `n < 2`).
pub fn mean_and_se<T: Scalar>(values: &[T]) -> (T, Option<T>) {
    let n = values.len();
    if n == 0 {
        return (T::zero(), None);
    }
    let nf = T::from_usize_c(n);
    let mean = values.iter().copied().sum::<T>() / nf;
    if n < 2 {
        return (mean, None);
    }
    let var = values
        .iter()
        .map(|&x| (x - mean) * (x - mean))
        .sum::<T>()
        / (nf - T::one());
    (mean, Some((var / nf).sqrt()))
}

/// Least-squares slope of `ln y` against `ln x`.
///
/// Requires at least 3 points with strictly positive coordinates.
pub fn fit_loglog_slope<T: Scalar>(points: &[(T, T)]) -> Result<SlopeFit<T>> {
    if points.len() < 3 {
        return Err(CoreError::Unsupported {
            reason: format!("log-log fit needs at least 3 points, got {}", points.len()),
        });
    }
    for &(x, y) in points {
        if x <= T::zero() || y <= T::zero() {
            return Err(CoreError::Numerical {
                context: "fit_loglog_slope",
                reason: format!("nonpositive point ({}, {})", x.as_f64(), y.as_f64()),
            });
        }
    }
    let n = T::from_usize_c(points.len());
    let logs: Vec<(T, T)> = points.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    let mx = logs.iter().map(|p| p.0).sum::<T>() / n;
    let my = logs.iter().map(|p| p.1).sum::<T>() / n;
    let sxx = logs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum::<T>();
    let sxy = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<T>();
    if sxx == T::zero() {
        return Err(CoreError::Numerical {
            context: "fit_loglog_slope",
            reason: "all x values coincide".into(),
        });
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr = logs
        .iter()
        .map(|&(x, y)| {
            let r = y - (intercept + slope * x);
            r * r
        })
        .sum::<T>();
    let dof = points.len() - 2;
    let ci_half_width = if dof == 0 {
        T::zero()
    } else {
        let s2 = ssr / T::from_usize_c(dof);
        T::from_f64_c(2.0) * (s2 / sxx).sqrt()
    };
    Ok(SlopeFit { slope, intercept, ci_half_width, n_points: points.len() })
}
