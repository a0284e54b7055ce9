//! Multi-path AR(1) Monte Carlo.
//!
//! Each path iterates `y_k = alpha * y_{k-1} + sigma_theta * z_k` from the last
//! realized return, compounds the simulated returns onto the spot, and the
//! discounted payoffs are averaged over all paths. Path `i` draws from the
//! substream `(master_seed, i)`, and paths are reduced in fixed-size chunks
//! merged in index order, so the output does not depend on the thread count.

use rayon::prelude::*;
use thiserror::Error;

use crate::market_data::OptionKind;
use crate::returns_ar::ArModel;
use crate::rng;
use crate::scalar::Scalar;

/// Paths per reduction chunk. Part of the determinism contract.
pub const CHUNK_PATHS: usize = 1024;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum McError {
    #[error("number of paths must be at least 1")]
    ZeroPaths,
    #[error("horizon must be at least one day")]
    ZeroHorizon,
    #[error("day count must be positive")]
    BadDayCount,
    #[error("strike must be positive, got {0}")]
    NonPositiveStrike(String),
    #[error("starting price must be positive, got {0}")]
    NonPositiveSpot(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McConfig<T> {
    pub num_paths: usize,
    pub master_seed: u64,
    pub horizon_days: usize,
    pub rate_annual: T,
    pub day_count: T,
}

impl<T: Scalar> McConfig<T> {
    pub fn new(num_paths: usize, master_seed: u64, horizon_days: usize, rate_annual: T) -> Self {
        McConfig { num_paths, master_seed, horizon_days, rate_annual, day_count: T::lit(252.0) }
    }

    pub fn validate(&self) -> Result<(), McError> {
        if self.num_paths == 0 {
            return Err(McError::ZeroPaths);
        }
        if self.horizon_days == 0 {
            return Err(McError::ZeroHorizon);
        }
        if !(self.day_count > T::zero()) {
            return Err(McError::BadDayCount);
        }
        Ok(())
    }

    /// Horizon in years, `horizon_days / day_count`.
    pub fn time_years(&self) -> T {
        T::from_count(self.horizon_days) / self.day_count
    }

    pub fn discount(&self) -> T {
        (-self.rate_annual * self.time_years()).exp()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McPrice<T> {
    pub premium: T,
    pub std_error: T,
    pub num_paths: usize,
}

/// Simulates one path of `horizon_days` steps and returns the terminal price.
/// Consumes exactly one standard normal from `noise` per day.
pub fn simulate_terminal_price<T: Scalar, I: IntoIterator<Item = T>>(
    model: &ArModel<T>,
    y_start: T,
    s_start: T,
    horizon_days: usize,
    noise: I,
) -> T {
    let mut noise = noise.into_iter();
    let mut y = y_start;
    let mut total = T::zero();
    for _ in 0..horizon_days {
        let z = noise.next().expect("noise stream shorter than horizon");
        y = model.alpha * y + model.sigma_theta * z;
        total = total + y;
    }
    s_start * total.exp()
}

fn path_terminal<T: Scalar>(model: &ArModel<T>, y_start: T, s_start: T, cfg: &McConfig<T>, path: usize) -> T {
    let mut gen = rng::substream(cfg.master_seed, path as u64);
    simulate_terminal_price(
        model,
        y_start,
        s_start,
        cfg.horizon_days,
        std::iter::repeat_with(|| T::standard_normal(&mut gen)),
    )
}

/// Terminal prices of every path, in path order.
pub fn simulate_terminal_prices<T: Scalar>(
    model: &ArModel<T>,
    s_start: T,
    y_start: T,
    cfg: &McConfig<T>,
) -> Result<Vec<T>, McError> {
    cfg.validate()?;
    check_spot(s_start)?;
    Ok((0..cfg.num_paths).into_par_iter().map(|i| path_terminal(model, y_start, s_start, cfg, i)).collect())
}

/// Running count, mean and sum of squared deviations (Welford), mergeable
/// with Chan's update.
#[derive(Debug, Clone, Copy)]
struct Moments<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Scalar> Moments<T> {
    fn new() -> Self {
        Moments { n: 0, mean: T::zero(), m2: T::zero() }
    }

    fn push(&mut self, x: T) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean = self.mean + delta / T::from_count(self.n);
        self.m2 = self.m2 + delta * (x - self.mean);
    }

    fn merge(self, other: Self) -> Self {
        if other.n == 0 {
            return self;
        }
        if self.n == 0 {
            return other;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (T::from_count(self.n), T::from_count(other.n), T::from_count(n));
        let delta = other.mean - self.mean;
        Moments { n, mean: self.mean + delta * nb / nt, m2: self.m2 + other.m2 + delta * delta * na * nb / nt }
    }

    fn sample_stdev(&self) -> T {
        if self.n < 2 {
            return T::zero();
        }
        (self.m2.max(T::zero()) / T::from_count(self.n - 1)).sqrt()
    }
}

fn check_spot<T: Scalar>(s_start: T) -> Result<(), McError> {
    if !(s_start > T::zero()) {
        return Err(McError::NonPositiveSpot(s_start.to_string()));
    }
    Ok(())
}

fn to_price<T: Scalar>(m: &Moments<T>, discount: T) -> McPrice<T> {
    McPrice {
        premium: (discount * m.mean).max(T::zero()),
        std_error: discount * m.sample_stdev() / T::from_count(m.n).sqrt(),
        num_paths: m.n,
    }
}

fn simulate_moments<T: Scalar>(
    model: &ArModel<T>,
    strike: T,
    s_start: T,
    y_start: T,
    cfg: &McConfig<T>,
) -> Result<(Moments<T>, Moments<T>), McError> {
    cfg.validate()?;
    check_spot(s_start)?;
    if !(strike > T::zero()) {
        return Err(McError::NonPositiveStrike(strike.to_string()));
    }
    let chunks = cfg.num_paths.div_ceil(CHUNK_PATHS);
    let partial: Vec<(Moments<T>, Moments<T>)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut call, mut put) = (Moments::new(), Moments::new());
            let end = ((c + 1) * CHUNK_PATHS).min(cfg.num_paths);
            for i in c * CHUNK_PATHS..end {
                let s_t = path_terminal(model, y_start, s_start, cfg, i);
                call.push((s_t - strike).max(T::zero()));
                put.push((strike - s_t).max(T::zero()));
            }
            (call, put)
        })
        .collect();
    Ok(partial.into_iter().fold((Moments::new(), Moments::new()), |(c, p), (cc, pp)| (c.merge(cc), p.merge(pp))))
}

/// Discounted mean payoff of one option over `cfg.num_paths` AR(1) paths.
pub fn price_option_mc<T: Scalar>(
    model: &ArModel<T>,
    kind: OptionKind,
    strike: T,
    s_start: T,
    y_start: T,
    cfg: &McConfig<T>,
) -> Result<McPrice<T>, McError> {
    let (call, put) = price_pair_mc(model, strike, s_start, y_start, cfg)?;
    Ok(match kind {
        OptionKind::Call => call,
        OptionKind::Put => put,
    })
}

/// Call and put priced on one shared set of paths.
pub fn price_pair_mc<T: Scalar>(
    model: &ArModel<T>,
    strike: T,
    s_start: T,
    y_start: T,
    cfg: &McConfig<T>,
) -> Result<(McPrice<T>, McPrice<T>), McError> {
    let (call, put) = simulate_moments(model, strike, s_start, y_start, cfg)?;
    let discount = cfg.discount();
    Ok((to_price(&call, discount), to_price(&put, discount)))
}
