#![allow(clippy::excessive_precision, clippy::approx_constant)]

//! Acceptance criteria, run in order by a single test. Each criterion prints
//! one PASS/FAIL line; the test fails if any criterion fails.
//!
//! `cargo test -p mamc-core --test acceptance -- --nocapture`

use std::panic::{catch_unwind, AssertUnwindSafe};

use mamc_core::mc_engine::simulate_terminal_prices;
use mamc_core::metrics::PricePair;
use mamc_core::synthetic::{synthetic_chain, synthetic_index, wednesdays, ChainSpec, IndexSpec};
use mamc_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

const MONEYNESS: [f64; 5] = [0.95, 0.975, 1.0, 1.025, 1.05];
const VOLS: [f64; 3] = [0.1, 0.2, 0.4];
const GRID_RATE: f64 = 0.01;
const STRIKE: f64 = 100.0;

fn grid() -> Vec<MarketSnapshot<f64>> {
    let mut out = Vec::new();
    for &m in &MONEYNESS {
        for days in 1..=5 {
            for &vol in &VOLS {
                out.push(MarketSnapshot {
                    spot: STRIKE * m,
                    strike: STRIKE,
                    rate_annual: GRID_RATE,
                    time_years: days as f64 / 252.0,
                    vol_annual: vol,
                });
            }
        }
    }
    out
}

/// Composite Simpson over `[a, b]` with `n` (even) panels.
fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let x = a + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(x);
    }
    s * h / 3.0
}

fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Discounted risk-neutral payoff expectation, integrating over the standard
/// normal driver with the payoff kink as an integration endpoint.
fn quadrature_price(s: &MarketSnapshot<f64>, kind: OptionKind) -> f64 {
    let sd = s.vol_annual * s.time_years.sqrt();
    let drift = (s.rate_annual - 0.5 * s.vol_annual * s.vol_annual) * s.time_years;
    let terminal = |z: f64| s.spot * (drift + sd * z).exp();
    let kink = ((s.strike / s.spot).ln() - drift) / sd;
    let lim = 14.0;
    let disc = (-s.rate_annual * s.time_years).exp();
    let value = match kind {
        OptionKind::Call if kink < lim => {
            simpson(|z| (terminal(z) - s.strike) * std_normal_pdf(z), kink.max(-lim), lim, 200_000)
        }
        OptionKind::Put if kink > -lim => {
            simpson(|z| (s.strike - terminal(z)) * std_normal_pdf(z), -lim, kink.min(lim), 200_000)
        }
        _ => 0.0,
    };
    disc * value
}

/// E[max(S e^X - K, 0)] with X ~ N(0, sd^2), by quadrature.
fn zero_drift_lognormal_call(spot: f64, strike: f64, sd: f64) -> f64 {
    let kink = (strike / spot).ln() / sd;
    simpson(|z| (spot * (sd * z).exp() - strike) * std_normal_pdf(z), kink, 14.0, 200_000)
}

struct Outcome {
    pass: bool,
    detail: String,
}

fn criterion_1() -> Outcome {
    let mut worst = 0.0f64;
    for s in grid() {
        for kind in [OptionKind::Call, OptionKind::Put] {
            let err = (bsm_price(&s, kind).unwrap() - quadrature_price(&s, kind)).abs();
            worst = worst.max(err);
        }
    }
    Outcome {
        pass: worst <= 1e-6,
        detail: format!("75 cells x call/put, max |bsm - quadrature| = {worst:.3e} (tol 1e-6)"),
    }
}

fn criterion_2() -> Outcome {
    let mut worst_bsm = 0.0f64;
    for s in grid() {
        let c = bsm_price(&s, OptionKind::Call).unwrap();
        let p = bsm_price(&s, OptionKind::Put).unwrap();
        let parity = s.spot - s.strike * (-s.rate_annual * s.time_years).exp();
        worst_bsm = worst_bsm.max((c - p - parity).abs());
    }

    let model = ArModel::new(0.15, 0.011);
    let cfg = McConfig::new(10_000, 2024, 5, 0.011);
    let (strike, spot, y0) = (9000.0, 9040.0, 0.004);
    let (call, put) = price_pair_mc(&model, strike, spot, y0, &cfg).unwrap();
    let terminals = simulate_terminal_prices(&model, spot, y0, &cfg).unwrap();
    let mean_terminal = terminals.iter().sum::<f64>() / terminals.len() as f64;
    let identity = cfg.discount() * (mean_terminal - strike);
    let mc_gap = (call.premium - put.premium - identity).abs();
    let mc_tol = 1e-10 * (1.0 + identity.abs().max(call.premium));

    Outcome {
        pass: worst_bsm <= 1e-10 && mc_gap <= mc_tol,
        detail: format!(
            "BSM max parity gap {worst_bsm:.3e} (tol 1e-10); MC U=1e4 call-put vs e^(-rT)(mean S_T - K) gap {mc_gap:.3e} (tol {mc_tol:.1e})"
        ),
    }
}

fn criterion_3() -> Outcome {
    let mut failures = Vec::new();
    for s in grid() {
        let bsm = bsm_price(&s, OptionKind::Call).unwrap();
        let e1000 = (crr_price(&s, OptionKind::Call, 1000).unwrap() - bsm).abs();
        let e50 = (crr_price(&s, OptionKind::Call, 50).unwrap() - bsm).abs();
        let within = e1000 <= 1e-3 * bsm;
        let improves = e1000 < e50;
        if !(within && improves) {
            failures.push(format!(
                "S/K={:.3} T={:.0}d vol={} bsm={bsm:.3e} |err1000|={e1000:.2e} |err50|={e50:.2e}",
                s.spot / s.strike,
                s.time_years * 252.0,
                s.vol_annual
            ));
        }
    }
    let detail = if failures.is_empty() {
        "all 75 call cells within 0.1% of BSM at n=1000 and better than n=50".to_string()
    } else {
        format!("{} of 75 call cells fail:\n      {}", failures.len(), failures.join("\n      "))
    };
    Outcome { pass: failures.is_empty(), detail }
}

fn criterion_4() -> Outcome {
    let (alpha, sigma, n, windows) = (0.3, 0.01, 252usize, 100u64);
    let mut estimates = Vec::new();
    for w in 0..windows {
        let mut rng = ChaCha20Rng::seed_from_u64(0xA5_0000 + w);
        let gauss = |rng: &mut ChaCha20Rng| {
            // Box-Muller, independent of the library's normal sampler
            let u1: f64 = 1.0 - rng.random::<f64>();
            let u2: f64 = rng.random();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let mut y = sigma / (1.0f64 - alpha * alpha).sqrt() * gauss(&mut rng);
        let mut ys = Vec::with_capacity(n);
        for _ in 0..n {
            y = alpha * y + sigma * gauss(&mut rng);
            ys.push(y);
        }
        estimates.push(fit_ar1(&ReturnSeries::undated(&ys).unwrap()).unwrap().alpha);
    }
    let mean = estimates.iter().sum::<f64>() / estimates.len() as f64;
    let close = estimates.iter().filter(|a| (**a - alpha).abs() <= 0.15).count();
    Outcome {
        pass: (mean - alpha).abs() <= 0.02 && close >= 95,
        detail: format!("mean alpha {mean:.4} (|err| tol 0.02); {close}/100 within +-0.15 (need 95)"),
    }
}

fn criterion_5() -> Outcome {
    let model = ArModel::new(0.0f64, 0.01);
    let sizes = [1_000usize, 10_000, 100_000, 1_000_000];
    let mut points = Vec::new();
    let mut last = None;
    for (i, &u) in sizes.iter().enumerate() {
        let cfg = McConfig::new(u, 500 + i as u64, 5, 0.0);
        let price = price_option_mc(&model, OptionKind::Call, 100.0, 100.0, 0.0, &cfg).unwrap();
        points.push(((u as f64).ln(), price.std_error.ln()));
        last = Some(price);
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let slope = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
        / points.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();

    let last = last.unwrap();
    let oracle = zero_drift_lognormal_call(100.0, 100.0, 0.01 * 5f64.sqrt());
    let z = (last.premium - oracle).abs() / last.std_error;
    Outcome {
        pass: (slope + 0.5).abs() <= 0.1 && z <= 3.0,
        detail: format!(
            "log-log slope {slope:.4} (want -0.5 +- 0.1); U=1e6 premium {:.6} vs oracle {oracle:.6}, {z:.2} std errors (max 3)",
            last.premium
        ),
    }
}

fn criterion_6() -> Outcome {
    // (pairs as (market, model)), [mean_error, std, rmse, smape, ape], smape exclusions;
    // expected values evaluated at 40 significant digits outside this crate
    type Case = (&'static [(f64, f64)], [f64; 5], usize);
    let cases: [Case; 10] = [
        (&[(10.0, 12.0)], [2.0, 0.0, 2.0, 18.181818181818182, 20.0], 0),
        (&[(10.0, 12.0), (10.0, 8.0)], [0.0, 2.8284271247461901, 2.0, 20.202020202020202, 20.0], 0),
        (&[(5.0, 5.0), (7.5, 7.5), (0.3, 0.3)], [0.0, 0.0, 0.0, 0.0, 0.0], 0),
        (
            &[(100.0, 90.0), (50.0, 55.0), (20.0, 20.0), (5.0, 8.0)],
            [-0.5, 6.658328118479393, 5.7879184513951127, 16.55099286678234, 10.285714285714286],
            0,
        ),
        (&[(1.0, 2.0), (2.0, 1.0)], [0.0, 1.414213562373095, 1.0, 66.666666666666667, 66.666666666666667], 0),
        (
            &[(0.5, 0.0), (0.2, 0.4), (3.0, 2.5)],
            [-0.26666666666666667, 0.40414518843273804, 0.42426406871192851, 94.949494949494949, 32.432432432432432],
            0,
        ),
        (
            &[(0.0, 0.0), (10.0, 12.0), (4.0, 3.0)],
            [0.33333333333333333, 1.5275252316519467, 1.2909944487358056, 23.376623376623377, 21.428571428571429],
            1,
        ),
        (
            &[(250.5, 240.25), (130.75, 141.5), (60.1, 58.9), (12.4, 15.0), (1.2, 0.8)],
            [0.3, 7.5586870553026602, 6.7673480773490586, 14.613868387627464, 5.5390702274975272],
            0,
        ),
        (&[(8.0, 10.0), (8.0, 10.0), (8.0, 10.0), (8.0, 10.0)], [2.0, 0.0, 2.0, 22.222222222222222, 25.0], 0),
        (
            &[(33.3, 30.0), (0.1, 0.9), (75.0, 74.2), (18.6, 21.0), (2.5, 1.1), (47.0, 47.0)],
            [-0.38333333333333333, 1.9497863130780939, 1.8207141456033124, 43.566319373721887, 4.9291784702549575],
            0,
        ),
    ];
    let mut worst = 0.0f64;
    let mut exclusions_ok = true;
    for (pairs, expected, excluded) in cases {
        let pairs: Vec<PricePair<f64>> = pairs.iter().map(|&(m, o)| PricePair::new(m, o)).collect();
        let s = compute_indicators(&pairs).unwrap();
        let got = [s.mean_error, s.std, s.rmse, s.smape, s.ape];
        for (g, e) in got.iter().zip(expected) {
            worst = worst.max((g - e).abs());
        }
        exclusions_ok &= s.smape_excluded == excluded;
    }

    let mut rng = ChaCha20Rng::seed_from_u64(66);
    let mut max_smape = 0.0f64;
    for _ in 0..10_000 {
        let q = rng.random_range(1..40);
        let pairs: Vec<PricePair<f64>> = (0..q)
            .map(|_| {
                let scale = 10f64.powf(rng.random_range(-2.0..3.0));
                let zero = |r: &mut ChaCha20Rng| r.random_bool(0.1);
                let m = if zero(&mut rng) { 0.0 } else { scale * rng.random::<f64>() };
                let o = if zero(&mut rng) { 0.0 } else { scale * rng.random::<f64>() };
                PricePair::new(m, o)
            })
            .collect();
        if pairs.iter().all(|p| p.market == 0.0) {
            continue;
        }
        max_smape = max_smape.max(compute_indicators(&pairs).unwrap().smape);
    }
    Outcome {
        pass: worst <= 1e-10 && exclusions_ok && max_smape <= 200.0,
        detail: format!(
            "10 oracle sets max |err| {worst:.3e} (tol 1e-10), exclusions {}; max SMAPE over 1e4 random sets {max_smape:.4} (<= 200)",
            if exclusions_ok { "match" } else { "MISMATCH" }
        ),
    }
}

fn criterion_7() -> Outcome {
    let index = synthetic_index(&IndexSpec { trading_days: 504, ..Default::default() });
    let issues: Vec<_> = wednesdays(&index, index.points()[300].0).into_iter().take(2).collect();
    let chain = synthetic_chain(&index, &ChainSpec { issue_dates: issues, ..Default::default() });
    let run = |threads: usize| {
        let mut cfg = BacktestConfig::new(0.011);
        cfg.master_seed = 42;
        cfg.threads = Some(threads);
        let report = run_backtest(&cfg, &index, &chain).unwrap();
        (
            render_report(&report, ReportFormat::Text).unwrap(),
            render_report(&report, ReportFormat::Csv).unwrap(),
            report.summary.quotes_priced,
        )
    };
    let a = run(1);
    let b = run(1);
    let c = run(4);
    Outcome {
        pass: a == b && a == c && chain.len() == 40,
        detail: format!(
            "{} contracts, {} priced quotes, U=50000: two runs {}, 1 vs 4 workers {}",
            chain.len(),
            a.2,
            if a == b { "identical" } else { "DIFFER" },
            if a == c { "identical" } else { "DIFFER" }
        ),
    }
}

fn criterion_8() -> Outcome {
    let index = synthetic_index(&IndexSpec { trading_days: 520, seed: 88, ..Default::default() });
    let issues = wednesdays(&index, index.points()[260].0);
    let chain = synthetic_chain(&index, &ChainSpec { issue_dates: issues, seed: 8, ..Default::default() });
    let mut cfg = BacktestConfig::new(0.011);
    cfg.num_paths = 2_000;
    cfg.master_seed = 8;
    let report = run_backtest(&cfg, &index, &chain).unwrap();

    let mut pass = true;
    let mut lines = Vec::new();
    for model in ModelKind::ALL {
        let cells: Vec<_> =
            [Group::Itm, Group::Ntm, Group::Otm].iter().map(|&g| *report.cell(model, g).unwrap()).collect();
        let dec = |f: fn(&IndicatorSet<f64>) -> f64| cells.windows(2).all(|w| f(&w[0]) > f(&w[1]));
        let inc = |f: fn(&IndicatorSet<f64>) -> f64| cells.windows(2).all(|w| f(&w[0]) < f(&w[1]));
        let ok = dec(|s| s.std) && dec(|s| s.rmse) && inc(|s| s.smape) && inc(|s| s.ape);
        pass &= ok;
        let fmt = |f: fn(&IndicatorSet<f64>) -> f64| {
            cells.iter().map(|c| format!("{:.2}", f(c))).collect::<Vec<_>>().join(" / ")
        };
        lines.push(format!(
            "{model}: STD {} RMSE {} SMAPE {} APE {} [{}]",
            fmt(|s| s.std),
            fmt(|s| s.rmse),
            fmt(|s| s.smape),
            fmt(|s| s.ape),
            if ok { "ok" } else { "wrong direction" }
        ));
    }
    Outcome {
        pass,
        detail: format!("{} quotes, ITM/NTM/OTM:\n      {}", report.summary.quotes_priced, lines.join("\n      ")),
    }
}

type Criterion = (&'static str, fn() -> Outcome);

#[test]
fn acceptance_criteria() {
    let criteria: [Criterion; 8] = [
        ("1 BSM matches lognormal quadrature", criterion_1),
        ("2 put-call parity (BSM, MC same paths)", criterion_2),
        ("3 CRR converges to BSM", criterion_3),
        ("4 AR(1) alpha recovery", criterion_4),
        ("5 MC sqrt(U) law and lognormal oracle", criterion_5),
        ("6 indicator oracle and SMAPE bound", criterion_6),
        ("7 end-to-end determinism", criterion_7),
        ("8 ITM-to-OTM indicator shape", criterion_8),
    ];
    let mut failed = Vec::new();
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run))
            .unwrap_or_else(|e| Outcome { pass: false, detail: format!("panicked: {e:?}") });
        println!("[{}] criterion {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
        if !outcome.pass {
            failed.push(name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
