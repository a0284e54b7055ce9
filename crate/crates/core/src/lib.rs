//! Pricing of short-dated European options with a multi-path AR(1) Monte Carlo
//! model, Black-Scholes-Merton and Cox-Ross-Rubinstein baselines, and a backtest
//! harness that scores all three against quoted option chains.
//!
//! The numerical code is generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the CLI uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod closed_form;
pub mod market_data;
pub mod mc_engine;
pub mod metrics;
pub mod returns_ar;
pub mod rng;
pub mod scalar;
pub mod synthetic;

pub use backtest::{
    calibrate_at, parse_report_csv, render_report, run_backtest, BacktestConfig, BacktestError, BacktestReport,
    Classification, Group, ModelKind, ReportFormat,
};
pub use closed_form::{
    annualized_volatility, bsm_price, crr_price, crr_price_with, default_crr_steps, norm_cdf, CrrMethod,
    MarketSnapshot, PricingError,
};
pub use market_data::{
    classify_moneyness, load_index_series, load_option_chain, DataError, Moneyness, OptionContract, OptionKind,
    PriceSeries,
};
pub use mc_engine::{price_option_mc, price_pair_mc, simulate_terminal_price, McConfig, McError, McPrice};
pub use metrics::{compute_indicators, IndicatorSet, MetricsError, PricePair};
pub use returns_ar::{expected_return, fit_ar1, log_returns, ArModel, FitError, ReturnSeries};
pub use scalar::Scalar;

pub type PriceSeriesF64 = PriceSeries<f64>;
pub type OptionContractF64 = OptionContract<f64>;
pub type ReturnSeriesF64 = ReturnSeries<f64>;
pub type ArModelF64 = ArModel<f64>;
pub type McConfigF64 = McConfig<f64>;
pub type McPriceF64 = McPrice<f64>;
pub type MarketSnapshotF64 = MarketSnapshot<f64>;
pub type PricePairF64 = PricePair<f64>;
pub type IndicatorSetF64 = IndicatorSet<f64>;
pub type BacktestConfigF64 = BacktestConfig<f64>;
pub type BacktestReportF64 = BacktestReport<f64>;

pub type ReturnSeriesF32 = ReturnSeries<f32>;
pub type ArModelF32 = ArModel<f32>;
pub type McPriceF32 = McPrice<f32>;
pub type MarketSnapshotF32 = MarketSnapshot<f32>;
pub type IndicatorSetF32 = IndicatorSet<f32>;
