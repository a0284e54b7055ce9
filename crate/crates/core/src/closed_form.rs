//! Black-Scholes-Merton and Cox-Ross-Rubinstein pricers for European options
//! on a non-dividend-paying underlying, and the historical volatility
//! estimator both consume.
//!
//! Zero volatility and zero time are priced by continuity: the option is
//! worth its discounted intrinsic value on the forward.

use thiserror::Error;

use crate::market_data::OptionKind;
use crate::returns_ar::ReturnSeries;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PricingError {
    #[error("invalid market snapshot: {0}")]
    InvalidSnapshot(String),
    #[error("binomial tree needs at least one step")]
    ZeroSteps,
    #[error("risk-neutral probability {p} outside [0, 1] (u = {u}, d = {d}, growth per step = {growth})")]
    ProbabilityOutOfRange { p: f64, u: f64, d: f64, growth: f64 },
    #[error("volatility window needs at least 2 returns, got {0}")]
    WindowTooShort(usize),
    #[error("day count must be positive")]
    BadDayCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MarketSnapshot<T> {
    pub spot: T,
    pub strike: T,
    pub rate_annual: T,
    pub time_years: T,
    pub vol_annual: T,
}

impl<T: Scalar> MarketSnapshot<T> {
    pub fn validate(&self) -> Result<(), PricingError> {
        let bad = |what: &str, v: T| Err(PricingError::InvalidSnapshot(format!("{what} = {v}")));
        if !(self.spot > T::zero()) {
            return bad("spot", self.spot);
        }
        if !(self.strike > T::zero()) {
            return bad("strike", self.strike);
        }
        if !(self.time_years >= T::zero()) || !self.time_years.is_finite() {
            return bad("time_years", self.time_years);
        }
        if !(self.vol_annual >= T::zero()) || !self.vol_annual.is_finite() {
            return bad("vol_annual", self.vol_annual);
        }
        if !self.rate_annual.is_finite() {
            return bad("rate_annual", self.rate_annual);
        }
        Ok(())
    }

    fn discount(&self) -> T {
        (-self.rate_annual * self.time_years).exp()
    }

    /// Discounted intrinsic value on the forward.
    fn forward_intrinsic(&self, kind: OptionKind) -> T {
        let pv_strike = self.strike * self.discount();
        match kind {
            OptionKind::Call => (self.spot - pv_strike).max(T::zero()),
            OptionKind::Put => (pv_strike - self.spot).max(T::zero()),
        }
    }
}

/// Standard normal CDF.
pub fn norm_cdf<T: Scalar>(x: T) -> T {
    T::lit(0.5 * libm::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

pub fn bsm_price<T: Scalar>(snap: &MarketSnapshot<T>, kind: OptionKind) -> Result<T, PricingError> {
    snap.validate()?;
    let vol_sqrt_t = snap.vol_annual * snap.time_years.sqrt();
    if vol_sqrt_t == T::zero() {
        return Ok(snap.forward_intrinsic(kind));
    }
    let half = T::lit(0.5);
    let d1 = ((snap.spot / snap.strike).ln()
        + (snap.rate_annual + half * snap.vol_annual * snap.vol_annual) * snap.time_years)
        / vol_sqrt_t;
    let d2 = d1 - vol_sqrt_t;
    let pv_strike = snap.strike * snap.discount();
    Ok(match kind {
        OptionKind::Call => snap.spot * norm_cdf(d1) - pv_strike * norm_cdf(d2),
        OptionKind::Put => pv_strike * norm_cdf(-d2) - snap.spot * norm_cdf(-d1),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CrrMethod {
    /// n-step lattice valued on terminal payoffs.
    Tree { steps: usize },
    /// Single step, discounted expected stock price with no payoff applied;
    /// the put follows from parity. Kept for auditing the one-step formula
    /// as printed, not for pricing.
    LiteralOneStep,
}

/// Default lattice depth: one step per trading day, at least 50.
pub fn default_crr_steps<T: Scalar>(time_years: T, day_count: T) -> usize {
    let days = (time_years * day_count).ceil().to_usize().unwrap_or(0);
    days.max(50)
}

/// CRR tree price. The call is valued on the lattice; the put is the call
/// minus spot plus discounted strike.
pub fn crr_price<T: Scalar>(snap: &MarketSnapshot<T>, kind: OptionKind, steps: usize) -> Result<T, PricingError> {
    crr_price_with(snap, kind, CrrMethod::Tree { steps })
}

pub fn crr_price_with<T: Scalar>(
    snap: &MarketSnapshot<T>,
    kind: OptionKind,
    method: CrrMethod,
) -> Result<T, PricingError> {
    snap.validate()?;
    let call = match method {
        CrrMethod::Tree { steps } => crr_tree_call(snap, steps)?,
        CrrMethod::LiteralOneStep => literal_one_step_call(snap)?,
    };
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => call - snap.spot + snap.strike * snap.discount(),
    })
}

fn risk_neutral_p<T: Scalar>(u: T, d: T, growth: T) -> Result<T, PricingError> {
    let p = (growth - d) / (u - d);
    if !(p >= T::zero() && p <= T::one()) {
        return Err(PricingError::ProbabilityOutOfRange {
            p: p.as_f64(),
            u: u.as_f64(),
            d: d.as_f64(),
            growth: growth.as_f64(),
        });
    }
    Ok(p)
}

fn crr_tree_call<T: Scalar>(snap: &MarketSnapshot<T>, steps: usize) -> Result<T, PricingError> {
    if steps == 0 {
        return Err(PricingError::ZeroSteps);
    }
    let dt = snap.time_years / T::from_count(steps);
    let jump = snap.vol_annual * dt.sqrt();
    if jump == T::zero() {
        return Ok(snap.forward_intrinsic(OptionKind::Call));
    }
    let u = jump.exp();
    let d = u.recip();
    let growth = (snap.rate_annual * dt).exp();
    let p = risk_neutral_p(u, d, growth)?;
    let q = T::one() - p;
    let step_discount = growth.recip();

    // node j has j up-moves
    let mut values: Vec<T> = (0..=steps)
        .map(|j| {
            let s = snap.spot * (jump * T::from_count(2 * j) - jump * T::from_count(steps)).exp();
            (s - snap.strike).max(T::zero())
        })
        .collect();
    for level in (0..steps).rev() {
        for j in 0..=level {
            values[j] = step_discount * (p * values[j + 1] + q * values[j]);
        }
    }
    Ok(values[0])
}

fn literal_one_step_call<T: Scalar>(snap: &MarketSnapshot<T>) -> Result<T, PricingError> {
    let jump = snap.vol_annual * snap.time_years.sqrt();
    let discount = snap.discount();
    if jump == T::zero() {
        return Ok(snap.spot);
    }
    let u = jump.exp();
    let d = u.recip();
    let p = risk_neutral_p(u, d, discount.recip())?;
    Ok(discount * (p * snap.spot * u + (T::one() - p) * snap.spot * d))
}

fn sample_stdev<T: Scalar>(values: &[T]) -> Result<T, PricingError> {
    let n = values.len();
    if n < 2 {
        return Err(PricingError::WindowTooShort(n));
    }
    let mean = values.iter().copied().sum::<T>() / T::from_count(n);
    let ss = values.iter().map(|&y| (y - mean) * (y - mean)).sum::<T>();
    Ok((ss / T::from_count(n - 1)).sqrt())
}

/// Sample standard deviation of the window's returns scaled by `√day_count`.
pub fn annualized_volatility<T: Scalar>(window: &ReturnSeries<T>, day_count: T) -> Result<T, PricingError> {
    if !(day_count > T::zero()) {
        return Err(PricingError::BadDayCount);
    }
    Ok(sample_stdev(&window.values())? * day_count.sqrt())
}

/// Sample standard deviation scaled by `√N`, N being the window length.
/// Agrees with [`annualized_volatility`] whenever N equals the day count.
pub fn annualized_volatility_by_window<T: Scalar>(window: &ReturnSeries<T>) -> Result<T, PricingError> {
    let n = window.len();
    Ok(sample_stdev(&window.values())? * T::from_count(n).sqrt())
}
