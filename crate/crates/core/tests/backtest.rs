use std::collections::BTreeMap;

use chrono::{Duration, NaiveDate};
use mamc_core::backtest::parse_report_csv;
use mamc_core::synthetic::{synthetic_chain, synthetic_index, wednesdays, ChainSpec, IndexSpec};
use mamc_core::*;

fn d(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

fn fixture(weeks: usize) -> (PriceSeries<f64>, Vec<OptionContract<f64>>) {
    let index = synthetic_index(&IndexSpec { trading_days: 320, ..Default::default() });
    let issues: Vec<NaiveDate> = wednesdays(&index, index.points()[260].0).into_iter().take(weeks).collect();
    let chain = synthetic_chain(&index, &ChainSpec { issue_dates: issues, ..Default::default() });
    (index, chain)
}

fn quick_cfg() -> BacktestConfig<f64> {
    let mut cfg = BacktestConfig::new(0.011);
    cfg.num_paths = 2_000;
    cfg.master_seed = 11;
    cfg
}

#[test]
fn degenerate_run_prices_intrinsic() {
    let start = d("2014-01-01");
    let points: Vec<(NaiveDate, f64)> = (0..40).map(|i| (start + Duration::days(i), 105.0)).collect();
    let index = PriceSeries::new("flat", points).unwrap();
    let pricing = start + Duration::days(35);
    let mut quotes = BTreeMap::new();
    quotes.insert(pricing, 5.0);
    let chain = vec![OptionContract {
        kind: OptionKind::Call,
        strike: 100.0,
        issue_date: pricing,
        expiry_date: start + Duration::days(39),
        quotes,
    }];
    let mut cfg = BacktestConfig::new(0.0);
    cfg.window_len = 20;
    cfg.num_paths = 100;
    let report = run_backtest(&cfg, &index, &chain).unwrap();
    assert_eq!(report.quotes.len(), 1);
    assert_eq!(report.quotes[0].premiums, vec![Some(5.0); 3]);
    for model in ModelKind::ALL {
        let cell = report.cell(model, Group::All).unwrap();
        assert_eq!((cell.mean_error, cell.std, cell.rmse, cell.smape, cell.ape), (0.0, 0.0, 0.0, 0.0, 0.0));
        assert_eq!(cell.count, 1);
    }
}

#[test]
fn panel_bookkeeping_and_additivity() {
    let (index, chain) = fixture(2);
    let report = run_backtest(&quick_cfg(), &index, &chain).unwrap();
    assert_eq!(report.summary.contracts_total, 40);
    assert_eq!(report.summary.contracts_priced, 40);
    assert_eq!(report.summary.quotes_at_expiry, 40);
    for model in ModelKind::ALL {
        let q = |g| report.cell(model, g).map_or(0, |c| c.count);
        assert_eq!(q(Group::Call), q(Group::Put));
        assert_eq!(q(Group::All), q(Group::Call) + q(Group::Put));
        assert_eq!(q(Group::All), q(Group::Itm) + q(Group::Ntm) + q(Group::Otm));
        assert_eq!(q(Group::All), report.quotes.len());
    }
    // exactly one NTM strike per kind per day
    let mut ntm: BTreeMap<(NaiveDate, OptionKind, NaiveDate), usize> = BTreeMap::new();
    for q in &report.quotes {
        if q.moneyness == Moneyness::Ntm {
            *ntm.entry((q.date, q.kind, chain[q.contract].expiry_date)).or_default() += 1;
        }
    }
    assert!(ntm.values().all(|&n| n == 1));
}

#[test]
fn expiry_day_and_missing_close_are_skipped() {
    let (index, mut chain) = fixture(1);
    // a Saturday quote has no index close
    let c = &mut chain[0];
    let saturday = c.issue_date + Duration::days(3);
    c.quotes.insert(saturday, 1.0);
    let report = run_backtest(&quick_cfg(), &index, &chain).unwrap();
    assert_eq!(report.summary.quotes_without_close, 1);
    assert_eq!(report.summary.quotes_at_expiry, 20);
    assert!(report.quotes.iter().all(|q| q.date < chain[q.contract].expiry_date));
    assert!(report.quotes.iter().all(|q| q.horizon_days >= 1));
}

#[test]
fn insufficient_history_reports_first_date() {
    let (index, chain) = fixture(1);
    let mut cfg = quick_cfg();
    cfg.window_len = 300;
    match run_backtest(&cfg, &index, &chain) {
        Err(BacktestError::InsufficientHistory { date, .. }) => assert_eq!(date, chain[0].issue_date),
        other => panic!("expected insufficient history, got {other:?}"),
    }
}

#[test]
fn config_and_chain_errors() {
    let (index, chain) = fixture(1);
    let mut cfg = quick_cfg();
    cfg.num_paths = 0;
    assert!(matches!(run_backtest(&cfg, &index, &chain), Err(BacktestError::Config(_))));
    assert_eq!(run_backtest(&quick_cfg(), &index, &[]), Err(BacktestError::EmptyChain));
}

#[test]
fn model_isolation() {
    let (index, chain) = fixture(1);
    let full = run_backtest(&quick_cfg(), &index, &chain).unwrap();
    for subset in [vec![ModelKind::Mamc], vec![ModelKind::Bsm, ModelKind::Bt], vec![ModelKind::Bt]] {
        let mut cfg = quick_cfg();
        cfg.models = subset.clone();
        let part = run_backtest(&cfg, &index, &chain).unwrap();
        assert_eq!(part.models, subset);
        for m in &subset {
            for g in Group::ALL {
                assert_eq!(part.cell(*m, g), full.cell(*m, g));
            }
        }
        assert!(part.cells.keys().all(|(m, _)| subset.contains(m)));
    }
}

#[test]
fn adding_contracts_keeps_existing_premiums() {
    let (index, chain) = fixture(2);
    let first_week: Vec<_> = chain.iter().filter(|c| c.issue_date == chain[0].issue_date).cloned().collect();
    let small = run_backtest(&quick_cfg(), &index, &first_week).unwrap();
    let big = run_backtest(&quick_cfg(), &index, &chain).unwrap();
    for q in &small.quotes {
        let same = big
            .quotes
            .iter()
            .find(|b| {
                b.date == q.date
                    && b.kind == q.kind
                    && b.strike == q.strike
                    && chain[b.contract].issue_date == first_week[0].issue_date
            })
            .unwrap();
        assert_eq!(same.premiums, q.premiums);
    }
}

#[test]
fn worker_count_does_not_change_bytes() {
    let (index, chain) = fixture(1);
    let render = |threads| {
        let mut cfg = quick_cfg();
        cfg.threads = Some(threads);
        let r = run_backtest(&cfg, &index, &chain).unwrap();
        render_report(&r, ReportFormat::Csv).unwrap()
    };
    assert_eq!(render(1), render(4));
}

#[test]
fn at_issue_classification_is_fixed_per_contract() {
    let (index, chain) = fixture(2);
    let mut cfg = quick_cfg();
    cfg.classification = Classification::AtIssue;
    cfg.models = vec![ModelKind::Bsm];
    let report = run_backtest(&cfg, &index, &chain).unwrap();
    let mut labels: BTreeMap<usize, Moneyness> = BTreeMap::new();
    for q in &report.quotes {
        assert_eq!(*labels.entry(q.contract).or_insert(q.moneyness), q.moneyness);
    }
    // ten calls per issue week: one NTM each
    assert_eq!(labels.values().filter(|&&m| m == Moneyness::Ntm).count(), 4);
    assert_eq!(report.header_value("classification"), Some("at-issue"));
}

#[test]
fn csv_report_round_trips() {
    let (index, chain) = fixture(1);
    let report = run_backtest(&quick_cfg(), &index, &chain).unwrap();
    let csv = render_report(&report, ReportFormat::Csv).unwrap();
    let back: BacktestReport<f64> = parse_report_csv(&csv).unwrap();
    assert_eq!(back.cells, report.cells);
    assert_eq!(back.header, report.header);
    assert_eq!(back.summary, report.summary);
    assert_eq!(render_report(&back, ReportFormat::Csv).unwrap(), csv);
    assert_eq!(render_report(&back, ReportFormat::Text).unwrap(), render_report(&report, ReportFormat::Text).unwrap());
}

#[test]
fn csv_rows_carry_cell_values_verbatim() {
    let (index, chain) = fixture(1);
    let report = run_backtest(&quick_cfg(), &index, &chain).unwrap();
    let csv = render_report(&report, ReportFormat::Csv).unwrap();
    let cell = report.cell(ModelKind::Bsm, Group::Put).unwrap();
    let expected = format!(
        "BSM,Put,{},{},{},{},{},{},{}",
        cell.count, cell.mean_error, cell.std, cell.rmse, cell.smape, cell.ape, cell.smape_excluded
    );
    assert!(csv.lines().any(|l| l == expected), "{csv}");
    assert_eq!(csv.lines().filter(|l| !l.starts_with('#')).count(), 1 + 3 * 6);
}

fn data_rows(text: &str) -> Vec<&str> {
    text.lines()
        .filter(|l| ["All", "Call", "Put", "ITM", "NTM", "OTM"].iter().any(|g| l.starts_with(&format!("{g} (Q="))))
        .collect()
}

#[test]
fn text_table_layout() {
    let (index, chain) = fixture(1);
    for models in [ModelKind::ALL.to_vec(), vec![ModelKind::Bsm, ModelKind::Bt], vec![ModelKind::Mamc]] {
        let mut cfg = quick_cfg();
        cfg.models = models.clone();
        let report = run_backtest(&cfg, &index, &chain).unwrap();
        let text = render_report(&report, ReportFormat::Text).unwrap();
        let rows = data_rows(&text);
        assert_eq!(rows.len(), 6);
        for row in rows {
            let (label, cells) = row.split_at(18);
            assert!(label.contains("(Q="));
            assert_eq!(1 + cells.split_whitespace().count(), 1 + 5 * models.len(), "{row}");
        }
        assert!(text.contains("Panel A: Type") && text.contains("Panel B: Moneyness"));
        assert_eq!(text.contains("MAMC"), models.contains(&ModelKind::Mamc));
    }
}

#[test]
fn empty_cells_render_as_dash() {
    let start = d("2014-01-01");
    let points: Vec<(NaiveDate, f64)> = (0..40).map(|i| (start + Duration::days(i), 105.0)).collect();
    let index = PriceSeries::new("flat", points).unwrap();
    let pricing = start + Duration::days(35);
    let chain = vec![OptionContract {
        kind: OptionKind::Call,
        strike: 100.0,
        issue_date: pricing,
        expiry_date: start + Duration::days(39),
        quotes: [(pricing, 5.5)].into_iter().collect(),
    }];
    let mut cfg = BacktestConfig::new(0.0);
    cfg.window_len = 20;
    cfg.num_paths = 10;
    let report = run_backtest(&cfg, &index, &chain).unwrap();
    let text = render_report(&report, ReportFormat::Text).unwrap();
    let put_row = data_rows(&text).into_iter().find(|r| r.starts_with("Put")).unwrap();
    assert!(put_row.starts_with("Put (Q=0)"));
    assert_eq!(put_row.matches('—').count(), 15);
    let call_row = data_rows(&text).into_iter().find(|r| r.starts_with("Call")).unwrap();
    assert!(call_row.starts_with("Call (Q=1)"));
    assert!(call_row.contains("-0.50*"));
}

#[test]
fn unknown_format_is_rejected() {
    assert_eq!("xml".parse::<ReportFormat>(), Err(BacktestError::UnknownFormat("xml".into())));
    assert_eq!("csv".parse::<ReportFormat>(), Ok(ReportFormat::Csv));
}
