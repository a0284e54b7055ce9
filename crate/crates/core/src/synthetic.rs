//! Synthetic index and weekly option-chain generators for fixtures and
//! end-to-end checks.
//!
//! The index follows an AR(1) log-return process on weekdays. Weekly chains
//! list ten calls and ten puts per issue date around the prior close, quoted
//! daily at a Black-Scholes-Merton value with multiplicative noise and a
//! 0.1-point tick.

use std::collections::BTreeMap;

use chrono::{Datelike, Duration, NaiveDate, Weekday};

use crate::closed_form::{bsm_price, MarketSnapshot};
use crate::market_data::{OptionContract, OptionKind, PriceSeries};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct IndexSpec {
    pub label: String,
    pub start: NaiveDate,
    pub trading_days: usize,
    pub spot0: f64,
    pub alpha: f64,
    pub daily_vol: f64,
    pub seed: u64,
}

impl Default for IndexSpec {
    fn default() -> Self {
        IndexSpec {
            label: "SYNTH".into(),
            start: NaiveDate::from_ymd_opt(2014, 1, 2).expect("valid date"),
            trading_days: 504,
            spot0: 9000.0,
            alpha: 0.05,
            daily_vol: 0.009,
            seed: 2014,
        }
    }
}

/// Weekday closes driven by `y_t = alpha * y_{t-1} + daily_vol * z_t`.
pub fn synthetic_index(spec: &IndexSpec) -> PriceSeries<f64> {
    let mut gen = rng::substream(spec.seed, 0);
    let mut points = Vec::with_capacity(spec.trading_days);
    let mut date = spec.start;
    let (mut close, mut y) = (spec.spot0, 0.0);
    while points.len() < spec.trading_days {
        if date.weekday().number_from_monday() <= 5 {
            if !points.is_empty() {
                y = spec.alpha * y + spec.daily_vol * f64::standard_normal(&mut gen);
                close *= y.exp();
            }
            points.push((date, (close * 100.0).round() / 100.0));
        }
        date += Duration::days(1);
    }
    PriceSeries::new(spec.label.clone(), points).expect("synthetic closes are positive")
}

#[derive(Debug, Clone)]
pub struct ChainSpec {
    pub issue_dates: Vec<NaiveDate>,
    pub strikes_per_kind: usize,
    pub strike_step: f64,
    /// Annualized volatility used to generate quotes.
    pub quote_vol: f64,
    pub rate_annual: f64,
    /// Standard deviation of the log-normal (proportional) quote noise.
    pub noise: f64,
    /// Standard deviation of the additive quote noise, in index points.
    pub additive_noise: f64,
    pub day_count: f64,
    pub seed: u64,
}

impl Default for ChainSpec {
    fn default() -> Self {
        ChainSpec {
            issue_dates: Vec::new(),
            strikes_per_kind: 10,
            strike_step: 50.0,
            quote_vol: 0.15,
            rate_annual: 0.011,
            noise: 0.10,
            additive_noise: 1.5,
            day_count: 252.0,
            seed: 7,
        }
    }
}

/// Every Wednesday of the index that has a following Wednesday in range.
pub fn wednesdays(index: &PriceSeries<f64>, from: NaiveDate) -> Vec<NaiveDate> {
    let last = index.last_date().expect("non-empty index");
    index
        .points()
        .iter()
        .map(|p| p.0)
        .filter(|d| *d >= from && d.weekday() == Weekday::Wed && *d + Duration::days(7) <= last)
        .collect()
}

/// Weekly contracts issued on each of `spec.issue_dates`, expiring seven
/// calendar days later, quoted on every index day in their life.
pub fn synthetic_chain(index: &PriceSeries<f64>, spec: &ChainSpec) -> Vec<OptionContract<f64>> {
    let mut out = Vec::new();
    let n = spec.strikes_per_kind;
    for &issue in &spec.issue_dates {
        let expiry = issue + Duration::days(7);
        let (_, prior) = index.prior_close(issue).expect("history before issue");
        let center = (prior / spec.strike_step).round() * spec.strike_step;
        for kind in [OptionKind::Call, OptionKind::Put] {
            for i in 0..n {
                let strike = center + spec.strike_step * (i as f64 - ((n - 1) / 2) as f64);
                let contract =
                    OptionContract { kind, strike, issue_date: issue, expiry_date: expiry, quotes: BTreeMap::new() };
                let mut gen = rng::substream(rng::mix_all(spec.seed, &contract.key_words()), 0);
                let mut quotes = BTreeMap::new();
                for &(date, spot) in index.points().iter().filter(|p| p.0 >= issue && p.0 <= expiry) {
                    let days = index.trading_days_between(date, expiry);
                    let snap = MarketSnapshot {
                        spot,
                        strike,
                        rate_annual: spec.rate_annual,
                        time_years: days as f64 / spec.day_count,
                        vol_annual: spec.quote_vol,
                    };
                    let fair = bsm_price(&snap, kind).expect("valid snapshot");
                    let z = f64::standard_normal(&mut gen);
                    let e = f64::standard_normal(&mut gen);
                    let noisy = if days == 0 { fair } else { fair * (spec.noise * z).exp() + spec.additive_noise * e };
                    quotes.insert(date, ((noisy * 10.0).round() / 10.0).max(0.1));
                }
                out.push(OptionContract { quotes, ..contract });
            }
        }
    }
    out
}

/// Chain rows in `chain.csv` layout, header included.
pub fn chain_to_csv<T: Scalar>(chain: &[OptionContract<T>]) -> String {
    let mut s = String::from("kind,strike,issue_date,expiry_date,quote_date,market_price\n");
    for c in chain {
        for (d, p) in &c.quotes {
            s.push_str(&format!("{},{},{},{},{},{}\n", c.kind.token(), c.strike, c.issue_date, c.expiry_date, d, p));
        }
    }
    s
}

/// Series rows in `index.csv` layout, header included.
pub fn index_to_csv<T: Scalar>(series: &PriceSeries<T>) -> String {
    let mut s = String::from("date,close\n");
    for (d, c) in series.points() {
        s.push_str(&format!("{d},{c}\n"));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market_data::{load_index_series, load_option_chain};

    #[test]
    fn index_is_deterministic_weekdays() {
        let spec = IndexSpec { trading_days: 30, ..Default::default() };
        let a = synthetic_index(&spec);
        assert_eq!(a, synthetic_index(&spec));
        assert_eq!(a.len(), 30);
        assert!(a.points().iter().all(|p| p.0.weekday().number_from_monday() <= 5));
    }

    #[test]
    fn csv_round_trip() {
        let index = synthetic_index(&IndexSpec { trading_days: 60, ..Default::default() });
        let issue = wednesdays(&index, index.points()[10].0)[0];
        let chain = synthetic_chain(&index, &ChainSpec { issue_dates: vec![issue], ..Default::default() });
        assert_eq!(chain.len(), 20);
        let back_index: PriceSeries<f64> = load_index_series(index_to_csv(&index).as_bytes(), "SYNTH").unwrap();
        assert_eq!(back_index, index);
        let back_chain: Vec<OptionContract<f64>> = load_option_chain(chain_to_csv(&chain).as_bytes()).unwrap();
        assert_eq!(back_chain, chain);
    }
}
