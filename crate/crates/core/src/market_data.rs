//! Underlying price series and option chains: CSV loading, validation,
//! dated lookups and moneyness classification.
//!
//! `index.csv` has header `date,close`; `chain.csv` has header
//! `kind,strike,issue_date,expiry_date,quote_date,market_price` with one row
//! per (contract, quote date) and `kind` one of `C`/`P`. Dates are ISO-8601.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::io::Read;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },
    #[error("unexpected header {found:?}, expected {expected:?}")]
    Header { found: String, expected: String },
    #[error("line {line}: non-positive price {value}")]
    NonPositivePrice { line: u64, value: String },
    #[error("line {line}: duplicate date {date}")]
    DuplicateDate { line: u64, date: NaiveDate },
    #[error("line {line}: unknown option kind {token:?} (expected C or P)")]
    UnknownKind { line: u64, token: String },
    #[error("line {line}: non-positive strike {value}")]
    NonPositiveStrike { line: u64, value: String },
    #[error("line {line}: negative market price {value}")]
    NegativePremium { line: u64, value: String },
    #[error("line {line}: expiry {expiry} is not after issue {issue}")]
    ExpiryNotAfterIssue { line: u64, issue: NaiveDate, expiry: NaiveDate },
    #[error("line {line}: quote date {date} outside contract life {issue}..={expiry}")]
    QuoteOutsideLife { line: u64, date: NaiveDate, issue: NaiveDate, expiry: NaiveDate },
    #[error("line {line}: conflicting duplicate quote on {date}")]
    ConflictingQuote { line: u64, date: NaiveDate },
    #[error("no rows in input")]
    Empty,
    #[error("strike list is empty")]
    EmptyStrikes,
    #[error("strike {0} is not part of the supplied chain strikes")]
    StrikeNotInChain(String),
    #[error("spot must be positive, got {0}")]
    NonPositiveSpot(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum OptionKind {
    Call,
    Put,
}

impl OptionKind {
    pub fn token(self) -> &'static str {
        match self {
            OptionKind::Call => "C",
            OptionKind::Put => "P",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        match token {
            "C" => Some(OptionKind::Call),
            "P" => Some(OptionKind::Put),
            _ => None,
        }
    }
}

impl fmt::Display for OptionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OptionKind::Call => "Call",
            OptionKind::Put => "Put",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Moneyness {
    Itm,
    Ntm,
    Otm,
}

impl fmt::Display for Moneyness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Moneyness::Itm => "ITM",
            Moneyness::Ntm => "NTM",
            Moneyness::Otm => "OTM",
        })
    }
}

/// Dated closing prices, strictly increasing in date, every close positive.
#[derive(Debug, Clone, PartialEq)]
pub struct PriceSeries<T> {
    points: Vec<(NaiveDate, T)>,
    label: String,
}

impl<T: Scalar> PriceSeries<T> {
    /// Builds a series from unordered points, enforcing the invariants.
    pub fn new(label: impl Into<String>, mut points: Vec<(NaiveDate, T)>) -> Result<Self, DataError> {
        for (i, &(_, close)) in points.iter().enumerate() {
            if !(close > T::zero()) || !close.is_finite() {
                return Err(DataError::NonPositivePrice { line: i as u64 + 1, value: close.to_string() });
            }
        }
        points.sort_by_key(|&(d, _)| d);
        if let Some(w) = points.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(DataError::DuplicateDate { line: 0, date: w[0].0 });
        }
        Ok(PriceSeries { points, label: label.into() })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn points(&self) -> &[(NaiveDate, T)] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn first_date(&self) -> Option<NaiveDate> {
        self.points.first().map(|p| p.0)
    }

    pub fn last_date(&self) -> Option<NaiveDate> {
        self.points.last().map(|p| p.0)
    }

    /// Position of `date` in the series, if it is a trading day.
    pub fn index_of(&self, date: NaiveDate) -> Option<usize> {
        self.points.binary_search_by_key(&date, |p| p.0).ok()
    }

    pub fn close_on(&self, date: NaiveDate) -> Option<T> {
        self.index_of(date).map(|i| self.points[i].1)
    }

    /// Last close strictly before `date`.
    pub fn prior_close(&self, date: NaiveDate) -> Option<(NaiveDate, T)> {
        let idx = self.points.partition_point(|p| p.0 < date);
        idx.checked_sub(1).map(|i| self.points[i])
    }

    /// The `len` points ending at (and including) `date`.
    pub fn window_ending(&self, date: NaiveDate, len: usize) -> Option<PriceSeries<T>> {
        let end = self.index_of(date)?;
        let start = (end + 1).checked_sub(len)?;
        Some(PriceSeries { points: self.points[start..=end].to_vec(), label: self.label.clone() })
    }

    /// Trading days in `(from, to]`. Beyond the last recorded date every
    /// weekday counts as a trading day.
    pub fn trading_days_between(&self, from: NaiveDate, to: NaiveDate) -> usize {
        if to <= from {
            return 0;
        }
        let lo = self.points.partition_point(|p| p.0 <= from);
        let hi = self.points.partition_point(|p| p.0 <= to);
        let mut days = hi.saturating_sub(lo);
        let tail_from = match self.last_date() {
            Some(last) if last > from => last,
            _ => from,
        };
        if to > tail_from {
            days += weekdays_between(tail_from, to);
        }
        days
    }
}

/// Weekdays in `(from, to]`.
fn weekdays_between(from: NaiveDate, to: NaiveDate) -> usize {
    from.iter_days().skip(1).take_while(|d| *d <= to).filter(|d| d.weekday().number_from_monday() <= 5).count()
}

/// One listed option with its daily market quotes.
#[derive(Debug, Clone, PartialEq)]
pub struct OptionContract<T> {
    pub kind: OptionKind,
    pub strike: T,
    pub issue_date: NaiveDate,
    pub expiry_date: NaiveDate,
    pub quotes: BTreeMap<NaiveDate, T>,
}

impl<T: Scalar> OptionContract<T> {
    /// Stable 64-bit identity of the contract terms, used for seeding.
    pub fn key_words(&self) -> [u64; 4] {
        [
            match self.kind {
                OptionKind::Call => 1,
                OptionKind::Put => 2,
            },
            self.strike.as_f64().to_bits(),
            self.issue_date.num_days_from_ce() as u64,
            self.expiry_date.num_days_from_ce() as u64,
        ]
    }
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).flexible(false).from_reader(source)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expected: &[&str]) -> Result<(), DataError> {
    let headers = rdr.headers().map_err(|e| malformed(1, e))?;
    let found: Vec<&str> = headers.iter().map(|h| h.trim_start_matches('\u{feff}')).collect();
    if found != expected {
        return Err(DataError::Header { found: found.join(","), expected: expected.join(",") });
    }
    Ok(())
}

fn malformed(line: u64, e: impl fmt::Display) -> DataError {
    DataError::Malformed { line, message: e.to_string() }
}

fn record_line(rec: &csv::StringRecord) -> u64 {
    rec.position().map(|p| p.line()).unwrap_or(0)
}

fn parse_date(line: u64, field: &str, what: &str) -> Result<NaiveDate, DataError> {
    NaiveDate::parse_from_str(field, "%Y-%m-%d").map_err(|e| malformed(line, format!("bad {what} {field:?}: {e}")))
}

fn parse_number<T: Scalar>(line: u64, field: &str, what: &str) -> Result<T, DataError> {
    match field.parse::<T>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(malformed(line, format!("bad {what} {field:?}"))),
    }
}

/// Reads an index file (`date,close`). Rows may appear in any order.
pub fn load_index_series<T: Scalar, R: Read>(source: R, label: &str) -> Result<PriceSeries<T>, DataError> {
    let mut rdr = csv_reader(source);
    check_header(&mut rdr, &["date", "close"])?;
    let mut rows: Vec<(NaiveDate, T, u64)> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e)
        })?;
        let line = record_line(&rec);
        let date = parse_date(line, &rec[0], "date")?;
        let close: T = parse_number(line, &rec[1], "close")?;
        if !(close > T::zero()) {
            return Err(DataError::NonPositivePrice { line, value: rec[1].to_string() });
        }
        rows.push((date, close, line));
    }
    if rows.is_empty() {
        return Err(DataError::Empty);
    }
    rows.sort_by_key(|r| (r.0, r.2));
    if let Some(w) = rows.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(DataError::DuplicateDate { line: w[0].2.max(w[1].2), date: w[1].0 });
    }
    let points = rows.into_iter().map(|(d, c, _)| (d, c)).collect();
    Ok(PriceSeries { points, label: label.to_string() })
}

/// Reads an option-chain file and groups rows into contracts keyed by
/// `(kind, strike, issue_date, expiry_date)`. Contracts come back sorted by
/// issue date, expiry date, kind, then strike.
pub fn load_option_chain<T: Scalar, R: Read>(source: R) -> Result<Vec<OptionContract<T>>, DataError> {
    let mut rdr = csv_reader(source);
    check_header(&mut rdr, &["kind", "strike", "issue_date", "expiry_date", "quote_date", "market_price"])?;
    let mut index: HashMap<(OptionKind, u64, NaiveDate, NaiveDate), usize> = HashMap::new();
    let mut contracts: Vec<OptionContract<T>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map(|p| p.line()).unwrap_or(0);
            malformed(line, e)
        })?;
        let line = record_line(&rec);
        let kind = OptionKind::from_token(&rec[0])
            .ok_or_else(|| DataError::UnknownKind { line, token: rec[0].to_string() })?;
        let strike: T = parse_number(line, &rec[1], "strike")?;
        if !(strike > T::zero()) {
            return Err(DataError::NonPositiveStrike { line, value: rec[1].to_string() });
        }
        let issue = parse_date(line, &rec[2], "issue_date")?;
        let expiry = parse_date(line, &rec[3], "expiry_date")?;
        if issue >= expiry {
            return Err(DataError::ExpiryNotAfterIssue { line, issue, expiry });
        }
        let quote_date = parse_date(line, &rec[4], "quote_date")?;
        if quote_date < issue || quote_date > expiry {
            return Err(DataError::QuoteOutsideLife { line, date: quote_date, issue, expiry });
        }
        let price: T = parse_number(line, &rec[5], "market_price")?;
        if price < T::zero() {
            return Err(DataError::NegativePremium { line, value: rec[5].to_string() });
        }
        let key = (kind, strike.as_f64().to_bits(), issue, expiry);
        let idx = *index.entry(key).or_insert_with(|| {
            contracts.push(OptionContract {
                kind,
                strike,
                issue_date: issue,
                expiry_date: expiry,
                quotes: BTreeMap::new(),
            });
            contracts.len() - 1
        });
        match contracts[idx].quotes.get(&quote_date) {
            Some(&existing) if existing != price => {
                return Err(DataError::ConflictingQuote { line, date: quote_date });
            }
            Some(_) => {}
            None => {
                contracts[idx].quotes.insert(quote_date, price);
            }
        }
    }
    if contracts.is_empty() {
        return Err(DataError::Empty);
    }
    contracts.sort_by(|a, b| {
        (a.issue_date, a.expiry_date, a.kind)
            .cmp(&(b.issue_date, b.expiry_date, b.kind))
            .then(a.strike.as_f64().total_cmp(&b.strike.as_f64()))
    });
    Ok(contracts)
}

/// Strike nearest to `spot`; ties go to the lower strike.
pub fn nearest_strike<T: Scalar>(strikes: &[T], spot: T) -> Option<T> {
    strikes.iter().copied().reduce(|best, k| {
        let (db, dk) = ((best - spot).abs(), (k - spot).abs());
        if dk < db || (dk == db && k < best) {
            k
        } else {
            best
        }
    })
}

/// Labels a contract ITM, NTM or OTM against `spot`. `chain_strikes` are the
/// same-kind strikes quoted on the classification date; exactly the nearest
/// one is NTM.
pub fn classify_moneyness<T: Scalar>(
    contract: &OptionContract<T>,
    chain_strikes: &[T],
    spot: T,
) -> Result<Moneyness, DataError> {
    if !(spot > T::zero()) {
        return Err(DataError::NonPositiveSpot(spot.to_string()));
    }
    let nearest = nearest_strike(chain_strikes, spot).ok_or(DataError::EmptyStrikes)?;
    if !chain_strikes.contains(&contract.strike) {
        return Err(DataError::StrikeNotInChain(contract.strike.to_string()));
    }
    if contract.strike == nearest {
        return Ok(Moneyness::Ntm);
    }
    let in_the_money = match contract.kind {
        OptionKind::Call => contract.strike < spot,
        OptionKind::Put => contract.strike > spot,
    };
    Ok(if in_the_money { Moneyness::Itm } else { Moneyness::Otm })
}
