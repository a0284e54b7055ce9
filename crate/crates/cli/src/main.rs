//! `mamc`: price single options and backtest option chains from CSV files.

use std::fs::{self, File};
use std::io::{self, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use chrono::NaiveDate;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use mamc_core::{
    bsm_price, calibrate_at, crr_price_with, default_crr_steps, load_index_series, load_option_chain, parse_report_csv,
    price_option_mc, render_report, run_backtest, BacktestConfig, BacktestError, Classification, CrrMethod,
    MarketSnapshot, McConfig, ModelKind, OptionKind, PriceSeries, ReportFormat,
};
use serde::{Deserialize, Serialize};

#[derive(Parser, Debug)]
#[command(name = "mamc", version, about = "AR(1) multi-path Monte Carlo option pricing and backtests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Price one European option on a given date.
    Price(PriceArgs),
    /// Price every quote of an option chain and report error indicators.
    Backtest(BacktestArgs),
    /// Re-render a CSV report.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
struct PriceArgs {
    /// Index closes, `date,close`.
    #[arg(long)]
    index: PathBuf,
    /// `C` or `P`.
    #[arg(long, value_parser = parse_kind)]
    kind: OptionKind,
    #[arg(long)]
    strike: f64,
    #[arg(long, value_parser = parse_date)]
    expiry: NaiveDate,
    /// Pricing date; must be a trading day in the index file.
    #[arg(long, value_parser = parse_date)]
    date: NaiveDate,
    /// Annual risk-free rate, continuously compounded.
    #[arg(long, allow_hyphen_values = true)]
    rate: f64,
    /// Monte Carlo paths.
    #[arg(long, default_value_t = 50_000, value_parser = clap::value_parser!(u64).range(1..))]
    paths: u64,
    /// Monte Carlo seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trailing returns used for calibration.
    #[arg(long, default_value_t = 252, value_parser = clap::value_parser!(u64).range(2..))]
    window: u64,
    /// Comma separated list of mamc, bsm, bt, or all.
    #[arg(long, default_value = "all", value_delimiter = ',', value_parser = parse_model_choice)]
    model: Vec<ModelChoice>,
    /// Trading days per year.
    #[arg(long, default_value_t = 252.0, value_parser = parse_positive)]
    day_count: f64,
    /// Binomial tree steps; one per trading day (at least 50) when omitted.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    crr_steps: Option<u64>,
    /// Price BT with the one-step discounted-forward formula.
    #[arg(long)]
    crr_literal: bool,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
    /// Print a JSON object instead of one line per model.
    #[arg(long)]
    json: bool,
}

#[derive(Args, Debug)]
struct BacktestArgs {
    /// Index closes, `date,close`.
    #[arg(long)]
    index: PathBuf,
    /// Option quotes, `kind,strike,issue_date,expiry_date,quote_date,market_price`.
    #[arg(long)]
    chain: PathBuf,
    /// Annual risk-free rate, continuously compounded.
    #[arg(long, allow_hyphen_values = true)]
    rate: f64,
    /// Trailing returns used for calibration.
    #[arg(long, default_value_t = 252, value_parser = clap::value_parser!(u64).range(2..))]
    window: u64,
    /// Monte Carlo paths per option.
    #[arg(long, default_value_t = 50_000, value_parser = clap::value_parser!(u64).range(1..))]
    paths: u64,
    /// Master seed for every Monte Carlo run.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trading days per year.
    #[arg(long, default_value_t = 252.0, value_parser = parse_positive)]
    day_count: f64,
    /// Binomial tree steps; one per trading day (at least 50) when omitted.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    crr_steps: Option<u64>,
    /// Price BT with the one-step discounted-forward formula.
    #[arg(long)]
    crr_literal: bool,
    /// Comma separated subset of mamc, bsm, bt.
    #[arg(long, default_value = "mamc,bsm,bt", value_delimiter = ',', value_parser = parse_model)]
    models: Vec<ModelKind>,
    /// `daily` or `at-issue`.
    #[arg(long, default_value = "daily", value_parser = parse_classification)]
    classification: Classification,
    /// `text` or `csv`.
    #[arg(long, default_value = "text", value_parser = parse_format)]
    format: ReportFormat,
    /// Write the report here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads; results do not depend on it.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    threads: Option<u64>,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// A report previously written with `--format csv`.
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "text", value_parser = parse_format)]
    format: ReportFormat,
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ModelChoice {
    One(ModelKind),
    All,
}

/// Machine-readable result of `price --json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriceOutput {
    pub date: String,
    pub expiry: String,
    pub kind: String,
    pub strike: f64,
    pub spot: f64,
    pub horizon_days: usize,
    pub rate_annual: f64,
    pub vol_annual: f64,
    pub alpha: f64,
    pub sigma_theta: f64,
    pub results: Vec<ModelPrice>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPrice {
    pub model: String,
    pub premium: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std_error: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num_paths: Option<usize>,
}

enum Failure {
    Usage(String),
    Data(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) => m,
        }
    }
}

impl From<BacktestError> for Failure {
    fn from(e: BacktestError) -> Self {
        match e {
            BacktestError::Config(_) | BacktestError::UnknownFormat(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn parse_date(s: &str) -> Result<NaiveDate, String> {
    if s.len() != 10 {
        return Err(format!("{s:?} is not an ISO-8601 date (YYYY-MM-DD)"));
    }
    NaiveDate::parse_from_str(s, "%Y-%m-%d").map_err(|e| format!("{s:?}: {e}"))
}

fn parse_kind(s: &str) -> Result<OptionKind, String> {
    OptionKind::from_token(s).ok_or_else(|| format!("unknown option kind {s:?} (expected C or P)"))
}

fn parse_model(s: &str) -> Result<ModelKind, String> {
    s.parse()
}

fn parse_model_choice(s: &str) -> Result<ModelChoice, String> {
    if s.eq_ignore_ascii_case("all") {
        Ok(ModelChoice::All)
    } else {
        s.parse().map(ModelChoice::One)
    }
}

fn parse_classification(s: &str) -> Result<Classification, String> {
    s.parse()
}

fn parse_format(s: &str) -> Result<ReportFormat, String> {
    s.parse().map_err(|e: BacktestError| e.to_string())
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        _ => Err(format!("{s:?} is not a positive number")),
    }
}

fn selected_models(choices: &[ModelChoice]) -> Vec<ModelKind> {
    let mut models: Vec<ModelKind> = choices
        .iter()
        .flat_map(|c| match c {
            ModelChoice::All => ModelKind::ALL.to_vec(),
            ModelChoice::One(m) => vec![*m],
        })
        .collect();
    models.sort();
    models.dedup();
    models
}

fn read_index(path: &Path) -> Result<PriceSeries<f64>, Failure> {
    let file = File::open(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
    let label = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    load_index_series(BufReader::new(file), &label).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

fn thread_pool(threads: Option<u64>) -> Result<Option<rayon::ThreadPool>, Failure> {
    threads
        .map(|n| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(n as usize)
                .build()
                .map_err(|e| Failure::Usage(format!("cannot start {n} worker threads: {e}")))
        })
        .transpose()
}

fn price(args: PriceArgs) -> Result<String, Failure> {
    if !(args.strike.is_finite() && args.strike > 0.0) {
        return Err(Failure::Usage(format!("--strike must be positive, got {}", args.strike)));
    }
    if !args.rate.is_finite() {
        return Err(Failure::Usage("--rate must be finite".into()));
    }
    if args.expiry <= args.date {
        return Err(Failure::Usage(format!("--expiry {} must be after --date {}", args.expiry, args.date)));
    }
    let index = read_index(&args.index)?;
    let calib = calibrate_at(&index, args.date, args.window as usize, args.day_count)?;
    let horizon_days = index.trading_days_between(args.date, args.expiry);
    if horizon_days == 0 {
        return Err(Failure::Data(format!("no trading days between {} and {}", args.date, args.expiry)));
    }
    let time_years = horizon_days as f64 / args.day_count;
    let snap = MarketSnapshot {
        spot: calib.spot,
        strike: args.strike,
        rate_annual: args.rate,
        time_years,
        vol_annual: calib.vol,
    };
    let pool = thread_pool(args.threads)?;

    let mut results = Vec::new();
    for model in selected_models(&args.model) {
        let fail = |e: &dyn std::fmt::Display| Failure::Data(format!("{model}: {e}"));
        let quote = match model {
            ModelKind::Mamc => {
                let cfg = McConfig {
                    num_paths: args.paths as usize,
                    master_seed: args.seed,
                    horizon_days,
                    rate_annual: args.rate,
                    day_count: args.day_count,
                };
                let run = || price_option_mc(&calib.ar, args.kind, args.strike, calib.spot, calib.y_last, &cfg);
                let p = match &pool {
                    Some(pool) => pool.install(run),
                    None => run(),
                }
                .map_err(|e| fail(&e))?;
                ModelPrice {
                    model: model.name().into(),
                    premium: p.premium,
                    std_error: Some(p.std_error),
                    num_paths: Some(p.num_paths),
                }
            }
            ModelKind::Bsm => ModelPrice {
                model: model.name().into(),
                premium: bsm_price(&snap, args.kind).map_err(|e| fail(&e))?,
                std_error: None,
                num_paths: None,
            },
            ModelKind::Bt => {
                let method = if args.crr_literal {
                    CrrMethod::LiteralOneStep
                } else {
                    let steps = args.crr_steps.map(|n| n as usize);
                    CrrMethod::Tree { steps: steps.unwrap_or_else(|| default_crr_steps(time_years, args.day_count)) }
                };
                ModelPrice {
                    model: model.name().into(),
                    premium: crr_price_with(&snap, args.kind, method).map_err(|e| fail(&e))?,
                    std_error: None,
                    num_paths: None,
                }
            }
        };
        results.push(quote);
    }

    let out = PriceOutput {
        date: args.date.to_string(),
        expiry: args.expiry.to_string(),
        kind: args.kind.token().into(),
        strike: args.strike,
        spot: calib.spot,
        horizon_days,
        rate_annual: args.rate,
        vol_annual: calib.vol,
        alpha: calib.ar.alpha,
        sigma_theta: calib.ar.sigma_theta,
        results,
    };
    if args.json {
        let mut text = serde_json::to_string_pretty(&out).expect("price output serializes");
        text.push('\n');
        Ok(text)
    } else {
        Ok(render_price_lines(&out))
    }
}

fn render_price_lines(out: &PriceOutput) -> String {
    let mut text = String::new();
    for r in &out.results {
        match r.std_error {
            Some(se) => text.push_str(&format!("{} {:.4} {:.4}\n", r.model, r.premium, se)),
            None => text.push_str(&format!("{} {:.4}\n", r.model, r.premium)),
        }
    }
    text
}

fn backtest(args: BacktestArgs) -> Result<String, Failure> {
    if !args.rate.is_finite() {
        return Err(Failure::Usage("--rate must be finite".into()));
    }
    let index = read_index(&args.index)?;
    let chain_file = File::open(&args.chain).map_err(|e| Failure::Data(format!("{}: {e}", args.chain.display())))?;
    let chain = load_option_chain::<f64, _>(BufReader::new(chain_file))
        .map_err(|e| Failure::Data(format!("{}: {e}", args.chain.display())))?;

    let mut cfg = BacktestConfig::new(args.rate);
    cfg.window_len = args.window as usize;
    cfg.num_paths = args.paths as usize;
    cfg.master_seed = args.seed;
    cfg.day_count = args.day_count;
    cfg.crr_steps = args.crr_steps.map(|n| n as usize);
    cfg.crr_literal = args.crr_literal;
    cfg.models = args.models;
    cfg.classification = args.classification;
    cfg.threads = args.threads.map(|n| n as usize);

    let report = run_backtest(&cfg, &index, &chain)?;
    Ok(render_report(&report, args.format)?)
}

fn report(args: ReportArgs) -> Result<String, Failure> {
    let text = fs::read_to_string(&args.input).map_err(|e| Failure::Data(format!("{}: {e}", args.input.display())))?;
    let report = parse_report_csv::<f64>(&text).map_err(|e| Failure::Data(format!("{}: {e}", args.input.display())))?;
    Ok(render_report(&report, args.format)?)
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), Failure> {
    match output {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
        None => io::stdout().lock().write_all(text.as_bytes()).map_err(|e| Failure::Data(format!("stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Price(args) => emit(&price(args)?, None),
        Command::Backtest(args) => {
            let output = args.output.clone();
            emit(&backtest(args)?, output.as_deref())
        }
        Command::Report(args) => {
            let output = args.output.clone();
            emit(&report(args)?, output.as_deref())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
