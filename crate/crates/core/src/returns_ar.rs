//! Log returns and the no-intercept AR(1) fit of the expected-return model.

use chrono::NaiveDate;
use thiserror::Error;

use crate::market_data::PriceSeries;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least {needed} points, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("non-finite return at position {0}")]
    NonFinite(usize),
}

/// Daily log returns, each dated at the later day of its price pair.
#[derive(Debug, Clone, PartialEq)]
pub struct ReturnSeries<T> {
    points: Vec<(NaiveDate, T)>,
}

impl<T: Scalar> ReturnSeries<T> {
    pub fn new(points: Vec<(NaiveDate, T)>) -> Result<Self, FitError> {
        if let Some(i) = points.iter().position(|p| !p.1.is_finite()) {
            return Err(FitError::NonFinite(i));
        }
        Ok(ReturnSeries { points })
    }

    /// Returns dated on consecutive calendar days from 1970-01-01. Handy for
    /// synthetic windows where the calendar is irrelevant.
    pub fn undated(values: &[T]) -> Result<Self, FitError> {
        let start = NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date");
        Self::new(start.iter_days().zip(values.iter().copied()).collect())
    }

    pub fn points(&self) -> &[(NaiveDate, T)] {
        &self.points
    }

    pub fn values(&self) -> Vec<T> {
        self.points.iter().map(|p| p.1).collect()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last(&self) -> Option<(NaiveDate, T)> {
        self.points.last().copied()
    }

    /// The last `len` returns.
    pub fn tail(&self, len: usize) -> Option<ReturnSeries<T>> {
        let start = self.points.len().checked_sub(len)?;
        Some(ReturnSeries { points: self.points[start..].to_vec() })
    }
}

/// Calibrated AR(1) expected-return model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ArModel<T> {
    pub alpha: T,
    /// Per-day standard deviation of the in-window residuals.
    pub sigma_theta: T,
    pub window_len: usize,
    pub fit_date: NaiveDate,
    /// Set when every lagged return in the window was zero; alpha is then 0.
    pub degenerate: bool,
}

impl<T: Scalar> ArModel<T> {
    pub fn new(alpha: T, sigma_theta: T) -> Self {
        ArModel {
            alpha,
            sigma_theta,
            window_len: 2,
            fit_date: NaiveDate::from_ymd_opt(1970, 1, 1).expect("valid date"),
            degenerate: false,
        }
    }

    /// `y_i - alpha * y_{i-1}` for each consecutive pair of `window`.
    pub fn residuals(&self, window: &[T]) -> Vec<T> {
        window.windows(2).map(|w| w[1] - self.alpha * w[0]).collect()
    }
}

/// `ln(close_{i+1} / close_i)` for each consecutive pair of closes.
pub fn log_returns<T: Scalar>(series: &PriceSeries<T>) -> Result<ReturnSeries<T>, FitError> {
    let pts = series.points();
    if pts.len() < 2 {
        return Err(FitError::TooShort { needed: 2, got: pts.len() });
    }
    ReturnSeries::new(pts.windows(2).map(|w| (w[1].0, (w[1].1 / w[0].1).ln())).collect())
}

/// Rebuilds closes from a starting close and a run of log returns.
pub fn recompound<T: Scalar>(start: T, returns: &[T]) -> Vec<T> {
    let mut out = Vec::with_capacity(returns.len() + 1);
    out.push(start);
    let mut s = start;
    for &y in returns {
        s = s * y.exp();
        out.push(s);
    }
    out
}

/// Least-squares slope through the origin over the consecutive pairs of the
/// window, plus the population standard deviation of the residuals.
pub fn fit_ar1<T: Scalar>(window: &ReturnSeries<T>) -> Result<ArModel<T>, FitError> {
    let ys = window.values();
    let n = ys.len();
    if n < 2 {
        return Err(FitError::TooShort { needed: 2, got: n });
    }
    let (mut sxy, mut sxx) = (T::zero(), T::zero());
    for w in ys.windows(2) {
        sxy = sxy + w[1] * w[0];
        sxx = sxx + w[0] * w[0];
    }
    let degenerate = sxx == T::zero();
    let alpha = if degenerate { T::zero() } else { sxy / sxx };

    let mut model = ArModel {
        alpha,
        sigma_theta: T::zero(),
        window_len: n,
        fit_date: window.last().map(|p| p.0).expect("non-empty"),
        degenerate,
    };
    let theta = model.residuals(&ys);
    let m = T::from_count(theta.len());
    let mean = theta.iter().copied().sum::<T>() / m;
    let var = theta.iter().map(|&t| (t - mean) * (t - mean)).sum::<T>() / m;
    model.sigma_theta = var.sqrt();
    Ok(model)
}

/// `alpha * y_prev`.
#[inline]
pub fn expected_return<T: Scalar>(model: &ArModel<T>, y_prev: T) -> T {
    model.alpha * y_prev
}
