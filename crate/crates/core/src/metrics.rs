//! Error indicators between market and model premiums: mean error, STD, RMSE,
//! SMAPE and APE.

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("no price pairs")]
    Empty,
    #[error("pair {index} is not finite and non-negative (market {market}, model {model})")]
    InvalidPair { index: usize, market: String, model: String },
    #[error("mean market price is zero; APE is undefined")]
    ZeroMarketMean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricePair<T> {
    pub market: T,
    pub model: T,
}

impl<T> PricePair<T> {
    pub fn new(market: T, model: T) -> Self {
        PricePair { market, model }
    }
}

/// Indicators for one group of pairs. Errors are `model - market`, so a
/// negative mean error means the model underprices.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IndicatorSet<T> {
    pub mean_error: T,
    /// Sample standard deviation of the errors (divisor Q - 1; 0 when Q = 1).
    pub std: T,
    pub rmse: T,
    /// Percent. Pairs with market + model = 0 are left out.
    pub smape: T,
    /// Percent, normalized by the mean market price.
    pub ape: T,
    pub count: usize,
    /// Pairs left out of SMAPE because market + model = 0.
    pub smape_excluded: usize,
}

pub fn compute_indicators<T: Scalar>(pairs: &[PricePair<T>]) -> Result<IndicatorSet<T>, MetricsError> {
    if pairs.is_empty() {
        return Err(MetricsError::Empty);
    }
    for (index, p) in pairs.iter().enumerate() {
        let ok = |v: T| v.is_finite() && v >= T::zero();
        if !ok(p.market) || !ok(p.model) {
            return Err(MetricsError::InvalidPair { index, market: p.market.to_string(), model: p.model.to_string() });
        }
    }
    let q = T::from_count(pairs.len());
    let hundred = T::lit(100.0);

    let errors: Vec<T> = pairs.iter().map(|p| p.model - p.market).collect();
    let mean_error = errors.iter().copied().sum::<T>() / q;
    let std = if pairs.len() > 1 {
        (errors.iter().map(|&e| (e - mean_error) * (e - mean_error)).sum::<T>() / (q - T::one())).sqrt()
    } else {
        T::zero()
    };
    let rmse = (errors.iter().map(|&e| e * e).sum::<T>() / q).sqrt();

    let mut smape_sum = T::zero();
    let mut included = 0usize;
    for p in pairs {
        let denom = p.market + p.model;
        if denom > T::zero() {
            smape_sum = smape_sum + (p.market - p.model).abs() / denom;
            included += 1;
        }
    }
    let smape = if included > 0 { T::lit(2.0) / T::from_count(included) * smape_sum * hundred } else { T::zero() };

    let mean_market = pairs.iter().map(|p| p.market).sum::<T>() / q;
    if mean_market == T::zero() {
        return Err(MetricsError::ZeroMarketMean);
    }
    let abs_sum = errors.iter().map(|e| e.abs()).sum::<T>();
    let ape = abs_sum / (q * mean_market) * hundred;

    Ok(IndicatorSet { mean_error, std, rmse, smape, ape, count: pairs.len(), smape_excluded: pairs.len() - included })
}
