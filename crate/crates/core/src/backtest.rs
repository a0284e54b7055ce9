//! Backtest harness: for every live contract on every quoted trading day,
//! calibrate on the trailing window, price with each selected model, pair the
//! model premium with the market quote and aggregate indicators by panel
//! (All, Call/Put, ITM/NTM/OTM).

use std::collections::hash_map::Entry;
use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use thiserror::Error;

use crate::closed_form::{
    annualized_volatility, bsm_price, crr_price_with, default_crr_steps, CrrMethod, MarketSnapshot,
};
use crate::market_data::{classify_moneyness, DataError, Moneyness, OptionContract, OptionKind, PriceSeries};
use crate::mc_engine::{price_option_mc, McConfig};
use crate::metrics::{compute_indicators, IndicatorSet, MetricsError, PricePair};
use crate::returns_ar::{fit_ar1, log_returns, ArModel, FitError, ReturnSeries};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BacktestError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("option chain is empty")]
    EmptyChain,
    #[error(
        "insufficient index history for pricing date {date}: need {needed} closes up to that day, have {available}"
    )]
    InsufficientHistory { date: NaiveDate, needed: usize, available: usize },
    #[error("{0} is not a trading day of the index")]
    NotTradingDay(NaiveDate),
    #[error("no close before {0} to classify moneyness against")]
    NoPriorClose(NaiveDate),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("{model} / {group}: {source}")]
    Metrics { model: ModelKind, group: Group, source: MetricsError },
    #[error("report is empty")]
    EmptyReport,
    #[error("unknown report format {0:?} (expected text or csv)")]
    UnknownFormat(String),
    #[error("malformed report line {line}: {message}")]
    ReportParse { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    Mamc,
    Bsm,
    Bt,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Mamc, ModelKind::Bsm, ModelKind::Bt];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Mamc => "MAMC",
            ModelKind::Bsm => "BSM",
            ModelKind::Bt => "BT",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "mamc" => Ok(ModelKind::Mamc),
            "bsm" => Ok(ModelKind::Bsm),
            "bt" => Ok(ModelKind::Bt),
            _ => Err(format!("unknown model {s:?} (expected mamc, bsm or bt)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Group {
    All,
    Call,
    Put,
    Itm,
    Ntm,
    Otm,
}

impl Group {
    pub const ALL: [Group; 6] = [Group::All, Group::Call, Group::Put, Group::Itm, Group::Ntm, Group::Otm];

    pub fn name(self) -> &'static str {
        match self {
            Group::All => "All",
            Group::Call => "Call",
            Group::Put => "Put",
            Group::Itm => "ITM",
            Group::Ntm => "NTM",
            Group::Otm => "OTM",
        }
    }

    fn of_kind(kind: OptionKind) -> Group {
        match kind {
            OptionKind::Call => Group::Call,
            OptionKind::Put => Group::Put,
        }
    }

    fn of_moneyness(m: Moneyness) -> Group {
        match m {
            Moneyness::Itm => Group::Itm,
            Moneyness::Ntm => Group::Ntm,
            Moneyness::Otm => Group::Otm,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Group {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Group::ALL.into_iter().find(|g| g.name() == s).ok_or_else(|| format!("unknown group {s:?}"))
    }
}

/// When a contract's moneyness label is decided.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Classification {
    /// Every pricing day, against the prior trading day's close.
    Daily,
    /// Once, on the issue date, against the close before issue.
    AtIssue,
}

impl Classification {
    pub fn name(self) -> &'static str {
        match self {
            Classification::Daily => "daily",
            Classification::AtIssue => "at-issue",
        }
    }
}

impl FromStr for Classification {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "daily" => Ok(Classification::Daily),
            "at-issue" => Ok(Classification::AtIssue),
            _ => Err(format!("unknown classification {s:?} (expected daily or at-issue)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestConfig<T> {
    /// Trailing returns used for calibration (N).
    pub window_len: usize,
    /// Monte Carlo paths per option (U).
    pub num_paths: usize,
    pub master_seed: u64,
    pub rate_annual: T,
    pub day_count: T,
    /// Lattice depth; `None` picks one step per trading day, at least 50.
    pub crr_steps: Option<usize>,
    /// Use the one-step discounted-forward formula instead of the lattice.
    pub crr_literal: bool,
    pub models: Vec<ModelKind>,
    pub classification: Classification,
    /// Worker threads; `None` uses the global pool. Never affects results.
    pub threads: Option<usize>,
}

impl<T: Scalar> BacktestConfig<T> {
    pub fn new(rate_annual: T) -> Self {
        BacktestConfig {
            window_len: 252,
            num_paths: 50_000,
            master_seed: 0,
            rate_annual,
            day_count: T::lit(252.0),
            crr_steps: None,
            crr_literal: false,
            models: ModelKind::ALL.to_vec(),
            classification: Classification::Daily,
            threads: None,
        }
    }

    pub fn validate(&self) -> Result<(), BacktestError> {
        let bad = |m: &str| Err(BacktestError::Config(m.to_string()));
        if self.window_len < 2 {
            return bad("window_len must be at least 2");
        }
        if self.num_paths == 0 {
            return bad("num_paths must be at least 1");
        }
        if !(self.day_count > T::zero()) {
            return bad("day_count must be positive");
        }
        if !self.rate_annual.is_finite() {
            return bad("rate must be finite");
        }
        if self.crr_steps == Some(0) {
            return bad("crr_steps must be at least 1");
        }
        if self.models.is_empty() {
            return bad("at least one model is required");
        }
        if self.threads == Some(0) {
            return bad("threads must be at least 1");
        }
        Ok(())
    }

    fn sorted_models(&self) -> Vec<ModelKind> {
        let mut m = self.models.clone();
        m.sort();
        m.dedup();
        m
    }

    /// Settings echoed into the report header. Thread count is left out since
    /// it cannot change the output.
    fn echo(&self) -> Vec<(String, String)> {
        let models: Vec<&str> = self.sorted_models().iter().map(|m| m.name()).collect();
        vec![
            ("window_len".into(), self.window_len.to_string()),
            ("num_paths".into(), self.num_paths.to_string()),
            ("master_seed".into(), self.master_seed.to_string()),
            ("rate_annual".into(), self.rate_annual.to_string()),
            ("day_count".into(), self.day_count.to_string()),
            ("crr_steps".into(), self.crr_steps.map_or("auto".to_string(), |n| n.to_string())),
            ("crr_method".into(), if self.crr_literal { "literal-one-step" } else { "tree" }.into()),
            ("models".into(), models.join(",")),
            ("classification".into(), self.classification.name().into()),
        ]
    }
}

/// One (contract, pricing day) with its market quote and model premiums.
#[derive(Debug, Clone, PartialEq)]
pub struct PricedQuote<T> {
    pub contract: usize,
    pub date: NaiveDate,
    pub kind: OptionKind,
    pub strike: T,
    pub moneyness: Moneyness,
    pub horizon_days: usize,
    pub market: T,
    /// Premium per model, in the order of [`BacktestReport::models`]; `None`
    /// when that model could not price the quote.
    pub premiums: Vec<Option<T>>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct BacktestSummary {
    pub first_date: Option<NaiveDate>,
    pub last_date: Option<NaiveDate>,
    pub contracts_total: usize,
    pub contracts_priced: usize,
    pub contracts_skipped: usize,
    pub quotes_priced: usize,
    /// Quotes on days missing from the index.
    pub quotes_without_close: usize,
    /// Quotes on the expiry day itself.
    pub quotes_at_expiry: usize,
    pub model_failures: BTreeMap<ModelKind, usize>,
}

impl BacktestSummary {
    fn header(&self) -> Vec<(String, String)> {
        let date = |d: Option<NaiveDate>| d.map_or("-".to_string(), |d| d.to_string());
        let mut h = vec![
            ("first_pricing_date".into(), date(self.first_date)),
            ("last_pricing_date".into(), date(self.last_date)),
            ("contracts_total".into(), self.contracts_total.to_string()),
            ("contracts_priced".into(), self.contracts_priced.to_string()),
            ("contracts_skipped".into(), self.contracts_skipped.to_string()),
            ("quotes_priced".into(), self.quotes_priced.to_string()),
            ("quotes_without_close".into(), self.quotes_without_close.to_string()),
            ("quotes_at_expiry".into(), self.quotes_at_expiry.to_string()),
        ];
        for (m, n) in &self.model_failures {
            h.push((format!("failures_{}", m.name()), n.to_string()));
        }
        h
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BacktestReport<T> {
    pub models: Vec<ModelKind>,
    pub cells: BTreeMap<(ModelKind, Group), IndicatorSet<T>>,
    /// `key: value` lines written above the table: configuration echo and run summary.
    pub header: Vec<(String, String)>,
    pub summary: BacktestSummary,
    /// Per-quote detail; empty for reports read back from CSV.
    pub quotes: Vec<PricedQuote<T>>,
}

impl<T: Scalar> BacktestReport<T> {
    pub fn cell(&self, model: ModelKind, group: Group) -> Option<&IndicatorSet<T>> {
        self.cells.get(&(model, group))
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }
}

/// Model inputs on one pricing date.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration<T> {
    /// Close on the pricing date.
    pub spot: T,
    /// Last return in the window, the starting point of every AR path.
    pub y_last: T,
    pub ar: ArModel<T>,
    /// Annualized historical volatility of the same window.
    pub vol: T,
}

struct Task {
    contract: usize,
    date: NaiveDate,
    moneyness: Moneyness,
    horizon_days: usize,
}

/// Same-kind strikes sharing issue and expiry with `contract`, optionally
/// restricted to those quoted on `on`.
fn sibling_strikes<T: Scalar>(
    chain: &[OptionContract<T>],
    contract: &OptionContract<T>,
    on: Option<NaiveDate>,
) -> Vec<T> {
    chain
        .iter()
        .filter(|c| {
            c.kind == contract.kind
                && c.issue_date == contract.issue_date
                && c.expiry_date == contract.expiry_date
                && on.is_none_or(|d| c.quotes.contains_key(&d))
        })
        .map(|c| c.strike)
        .collect()
}

fn classify_on<T: Scalar>(
    index: &PriceSeries<T>,
    chain: &[OptionContract<T>],
    contract: &OptionContract<T>,
    date: NaiveDate,
    quoted_only: bool,
) -> Result<Moneyness, BacktestError> {
    let (_, spot) = index.prior_close(date).ok_or(BacktestError::NoPriorClose(date))?;
    let mut strikes = sibling_strikes(chain, contract, quoted_only.then_some(date));
    if strikes.is_empty() {
        strikes = sibling_strikes(chain, contract, None);
    }
    Ok(classify_moneyness(contract, &strikes, spot)?)
}

/// Calibrates on the `window_len` returns ending at `date`, which must be a
/// trading day of `index` with at least `window_len` earlier closes.
pub fn calibrate_at<T: Scalar>(
    index: &PriceSeries<T>,
    date: NaiveDate,
    window_len: usize,
    day_count: T,
) -> Result<Calibration<T>, BacktestError> {
    let returns = log_returns(index)?;
    calibrate_with(index, &returns, date, window_len, day_count)
}

fn calibrate_with<T: Scalar>(
    index: &PriceSeries<T>,
    returns: &ReturnSeries<T>,
    date: NaiveDate,
    window_len: usize,
    day_count: T,
) -> Result<Calibration<T>, BacktestError> {
    let pos = index.index_of(date).ok_or(BacktestError::NotTradingDay(date))?;
    if pos < window_len || window_len < 2 {
        return Err(BacktestError::InsufficientHistory { date, needed: window_len + 1, available: pos + 1 });
    }
    // return j is dated at index point j + 1
    let window = ReturnSeries::new(returns.points()[pos - window_len..pos].to_vec())?;
    let ar = fit_ar1(&window)?;
    let vol = annualized_volatility(&window, day_count).map_err(|e| BacktestError::Config(e.to_string()))?;
    let (_, y_last) = window.last().expect("window_len >= 2");
    Ok(Calibration { spot: index.points()[pos].1, y_last, ar, vol })
}

fn price_task<T: Scalar>(
    task: &Task,
    contract: &OptionContract<T>,
    calib: &Calibration<T>,
    models: &[ModelKind],
    cfg: &BacktestConfig<T>,
) -> Vec<Option<T>> {
    let time_years = T::from_count(task.horizon_days) / cfg.day_count;
    let snap = MarketSnapshot {
        spot: calib.spot,
        strike: contract.strike,
        rate_annual: cfg.rate_annual,
        time_years,
        vol_annual: calib.vol,
    };
    models
        .iter()
        .map(|model| match model {
            ModelKind::Mamc => {
                let mut words = contract.key_words().to_vec();
                words.push(task.date.num_days_from_ce() as u64);
                let mc = McConfig {
                    num_paths: cfg.num_paths,
                    master_seed: rng::mix_all(cfg.master_seed, &words),
                    horizon_days: task.horizon_days,
                    rate_annual: cfg.rate_annual,
                    day_count: cfg.day_count,
                };
                price_option_mc(&calib.ar, contract.kind, contract.strike, calib.spot, calib.y_last, &mc)
                    .ok()
                    .map(|p| p.premium)
            }
            ModelKind::Bsm => bsm_price(&snap, contract.kind).ok(),
            ModelKind::Bt => {
                let method = if cfg.crr_literal {
                    CrrMethod::LiteralOneStep
                } else {
                    CrrMethod::Tree {
                        steps: cfg.crr_steps.unwrap_or_else(|| default_crr_steps(time_years, cfg.day_count)),
                    }
                };
                crr_price_with(&snap, contract.kind, method).ok()
            }
        })
        .collect()
}

/// Runs the full protocol over `chain`, pricing each contract on each quoted
/// day strictly before expiry.
pub fn run_backtest<T: Scalar>(
    cfg: &BacktestConfig<T>,
    index: &PriceSeries<T>,
    chain: &[OptionContract<T>],
) -> Result<BacktestReport<T>, BacktestError> {
    cfg.validate()?;
    match cfg.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| BacktestError::Config(e.to_string()))?
            .install(|| run_inner(cfg, index, chain)),
        None => run_inner(cfg, index, chain),
    }
}

fn run_inner<T: Scalar>(
    cfg: &BacktestConfig<T>,
    index: &PriceSeries<T>,
    chain: &[OptionContract<T>],
) -> Result<BacktestReport<T>, BacktestError> {
    if chain.is_empty() {
        return Err(BacktestError::EmptyChain);
    }
    let models = cfg.sorted_models();
    let mut summary = BacktestSummary { contracts_total: chain.len(), ..Default::default() };

    let mut tasks = Vec::new();
    for (ci, contract) in chain.iter().enumerate() {
        let at_issue = match cfg.classification {
            Classification::AtIssue => Some(classify_on(index, chain, contract, contract.issue_date, false)?),
            Classification::Daily => None,
        };
        let before = tasks.len();
        for &date in contract.quotes.keys() {
            if date >= contract.expiry_date {
                summary.quotes_at_expiry += 1;
                continue;
            }
            if index.index_of(date).is_none() {
                summary.quotes_without_close += 1;
                continue;
            }
            let horizon_days = index.trading_days_between(date, contract.expiry_date);
            let moneyness = match at_issue {
                Some(m) => m,
                None => classify_on(index, chain, contract, date, true)?,
            };
            tasks.push(Task { contract: ci, date, moneyness, horizon_days });
        }
        if tasks.len() > before {
            summary.contracts_priced += 1;
        } else {
            summary.contracts_skipped += 1;
        }
    }

    if let Some(t) =
        tasks.iter().filter(|t| index.index_of(t.date).expect("checked") < cfg.window_len).min_by_key(|t| t.date)
    {
        return Err(BacktestError::InsufficientHistory {
            date: t.date,
            needed: cfg.window_len + 1,
            available: index.index_of(t.date).expect("checked") + 1,
        });
    }

    let returns = if tasks.is_empty() { None } else { Some(log_returns(index)?) };
    let mut calibrations: HashMap<NaiveDate, Calibration<T>> = HashMap::new();
    for t in &tasks {
        if let Entry::Vacant(slot) = calibrations.entry(t.date) {
            slot.insert(calibrate_with(
                index,
                returns.as_ref().expect("tasks exist"),
                t.date,
                cfg.window_len,
                cfg.day_count,
            )?);
        }
    }

    let premiums: Vec<Vec<Option<T>>> =
        tasks.par_iter().map(|t| price_task(t, &chain[t.contract], &calibrations[&t.date], &models, cfg)).collect();

    let quotes: Vec<PricedQuote<T>> = tasks
        .iter()
        .zip(premiums)
        .map(|(t, premiums)| {
            let c = &chain[t.contract];
            PricedQuote {
                contract: t.contract,
                date: t.date,
                kind: c.kind,
                strike: c.strike,
                moneyness: t.moneyness,
                horizon_days: t.horizon_days,
                market: c.quotes[&t.date],
                premiums,
            }
        })
        .collect();

    summary.quotes_priced = quotes.len();
    summary.first_date = quotes.iter().map(|q| q.date).min();
    summary.last_date = quotes.iter().map(|q| q.date).max();

    let mut cells = BTreeMap::new();
    for (mi, &model) in models.iter().enumerate() {
        let failures = quotes.iter().filter(|q| q.premiums[mi].is_none()).count();
        summary.model_failures.insert(model, failures);
        for group in Group::ALL {
            let pairs: Vec<PricePair<T>> = quotes
                .iter()
                .filter(|q| match group {
                    Group::All => true,
                    Group::Call | Group::Put => Group::of_kind(q.kind) == group,
                    _ => Group::of_moneyness(q.moneyness) == group,
                })
                .filter_map(|q| q.premiums[mi].map(|p| PricePair::new(q.market, p)))
                .collect();
            if pairs.is_empty() {
                continue;
            }
            let set = compute_indicators(&pairs).map_err(|source| BacktestError::Metrics { model, group, source })?;
            cells.insert((model, group), set);
        }
    }

    let mut header = cfg.echo();
    header.extend(summary.header());
    Ok(BacktestReport { models, cells, header, summary, quotes })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = BacktestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "text" | "table" => Ok(ReportFormat::Text),
            "csv" => Ok(ReportFormat::Csv),
            other => Err(BacktestError::UnknownFormat(other.to_string())),
        }
    }
}

const CSV_COLUMNS: &str = "model,group,count,mean_error,std,rmse,smape,ape,smape_excluded";
const LABEL_WIDTH: usize = 18;
const CELL_WIDTH: usize = 10;
const EMPTY_CELL: &str = "—";

pub fn render_report<T: Scalar>(report: &BacktestReport<T>, format: ReportFormat) -> Result<String, BacktestError> {
    if report.models.is_empty() {
        return Err(BacktestError::EmptyReport);
    }
    let mut out = String::new();
    for (k, v) in &report.header {
        writeln!(out, "# {k}: {v}").expect("write to String");
    }
    match format {
        ReportFormat::Csv => render_csv(report, &mut out),
        ReportFormat::Text => render_text(report, &mut out),
    }
    Ok(out)
}

fn render_csv<T: Scalar>(report: &BacktestReport<T>, out: &mut String) {
    out.push_str(CSV_COLUMNS);
    out.push('\n');
    for &model in &report.models {
        for group in Group::ALL {
            match report.cell(model, group) {
                Some(s) => writeln!(
                    out,
                    "{model},{group},{},{},{},{},{},{},{}",
                    s.count, s.mean_error, s.std, s.rmse, s.smape, s.ape, s.smape_excluded
                ),
                None => writeln!(out, "{model},{group},0,,,,,,0"),
            }
            .expect("write to String");
        }
    }
}

const INDICATORS: [&str; 5] = ["Mean error", "STD", "RMSE", "SMAPE (%)", "APE (%)"];

fn indicator<T: Scalar>(s: &IndicatorSet<T>, i: usize) -> T {
    match i {
        0 => s.mean_error,
        1 => s.std,
        2 => s.rmse,
        3 => s.smape,
        _ => s.ape,
    }
}

fn render_text<T: Scalar>(report: &BacktestReport<T>, out: &mut String) {
    let models = &report.models;
    let span = CELL_WIDTH * models.len();
    let mut line = format!("{:<LABEL_WIDTH$}", "");
    for name in INDICATORS {
        line.push_str(&format!("{name:>span$}"));
    }
    out.push_str(line.trim_end());
    out.push('\n');
    let mut line = format!("{:<LABEL_WIDTH$}", "Option type");
    for _ in INDICATORS {
        for m in models {
            line.push_str(&format!("{:>CELL_WIDTH$}", m.name()));
        }
    }
    out.push_str(&line);
    out.push('\n');
    out.push_str(&"-".repeat(LABEL_WIDTH + 5 * span));
    out.push('\n');

    let row = |out: &mut String, group: Group| {
        let count = report.models.iter().filter_map(|&m| report.cell(m, group).map(|s| s.count)).max().unwrap_or(0);
        let mut line = format!("{:<LABEL_WIDTH$}", format!("{} (Q={count})", group.name()));
        for i in 0..INDICATORS.len() {
            // mean error is ranked by magnitude, everything else by value
            let score = |m: ModelKind| {
                report.cell(m, group).map(|s| {
                    let v = indicator(s, i).as_f64();
                    if i == 0 {
                        v.abs()
                    } else {
                        v
                    }
                })
            };
            let best = models.iter().filter_map(|&m| score(m)).reduce(f64::min);
            for &m in models {
                let text = match report.cell(m, group) {
                    Some(s) => {
                        let flag = if models.len() > 1 && score(m) == best { "*" } else { "" };
                        format!("{}{flag}", format_value(indicator(s, i)))
                    }
                    None => EMPTY_CELL.to_string(),
                };
                line.push_str(&format!("{text:>CELL_WIDTH$}"));
            }
        }
        out.push_str(&line);
        out.push('\n');
    };

    row(out, Group::All);
    out.push_str("Panel A: Type\n");
    row(out, Group::Call);
    row(out, Group::Put);
    out.push_str("Panel B: Moneyness\n");
    row(out, Group::Itm);
    row(out, Group::Ntm);
    row(out, Group::Otm);
}

fn format_value<T: Scalar>(v: T) -> String {
    let s = format!("{:.2}", v.as_f64());
    if s == "-0.00" {
        "0.00".to_string()
    } else {
        s
    }
}

/// Reads a report written with [`ReportFormat::Csv`].
pub fn parse_report_csv<T: Scalar>(text: &str) -> Result<BacktestReport<T>, BacktestError> {
    let err = |line: usize, message: String| BacktestError::ReportParse { line, message };
    let mut header = Vec::new();
    let mut cells = BTreeMap::new();
    let mut models: Vec<ModelKind> = Vec::new();
    let mut seen_columns = false;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim_end_matches('\r');
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(": ").ok_or_else(|| err(line_no, "header without ': '".into()))?;
            header.push((k.to_string(), v.to_string()));
            continue;
        }
        if !seen_columns {
            if line != CSV_COLUMNS {
                return Err(err(line_no, format!("expected column header {CSV_COLUMNS:?}")));
            }
            seen_columns = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 9 {
            return Err(err(line_no, format!("expected 9 fields, found {}", f.len())));
        }
        let model: ModelKind = f[0].parse().map_err(|e| err(line_no, e))?;
        let group: Group = f[1].parse().map_err(|e| err(line_no, e))?;
        if !models.contains(&model) {
            models.push(model);
        }
        let count: usize = f[2].parse().map_err(|_| err(line_no, format!("bad count {:?}", f[2])))?;
        if count == 0 {
            continue;
        }
        let num = |s: &str| s.parse::<T>().map_err(|_| err(line_no, format!("bad number {s:?}")));
        cells.insert(
            (model, group),
            IndicatorSet {
                count,
                mean_error: num(f[3])?,
                std: num(f[4])?,
                rmse: num(f[5])?,
                smape: num(f[6])?,
                ape: num(f[7])?,
                smape_excluded: f[8].parse().map_err(|_| err(line_no, format!("bad count {:?}", f[8])))?,
            },
        );
    }
    if !seen_columns {
        return Err(BacktestError::EmptyReport);
    }
    let summary = summary_from_header(&header);
    Ok(BacktestReport { models, cells, header, summary, quotes: Vec::new() })
}

fn summary_from_header(header: &[(String, String)]) -> BacktestSummary {
    let get = |k: &str| header.iter().find(|(key, _)| key == k).map(|(_, v)| v.as_str());
    let count = |k: &str| get(k).and_then(|v| v.parse().ok()).unwrap_or(0);
    let date = |k: &str| get(k).and_then(|v| NaiveDate::parse_from_str(v, "%Y-%m-%d").ok());
    let model_failures = ModelKind::ALL
        .into_iter()
        .filter_map(|m| get(&format!("failures_{}", m.name())).and_then(|v| v.parse().ok()).map(|n| (m, n)))
        .collect();
    BacktestSummary {
        first_date: date("first_pricing_date"),
        last_date: date("last_pricing_date"),
        contracts_total: count("contracts_total"),
        contracts_priced: count("contracts_priced"),
        contracts_skipped: count("contracts_skipped"),
        quotes_priced: count("quotes_priced"),
        quotes_without_close: count("quotes_without_close"),
        quotes_at_expiry: count("quotes_at_expiry"),
        model_failures,
    }
}
