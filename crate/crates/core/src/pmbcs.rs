//! Momentum trading against a closed-string template.
//!
//! A window of `ls + 1` prices is standardized onto `[0, 1]` and compared
//! with a periodic template; the Q-mean distance is the momentum `M`. During
//! learning, every site opens a hypothetical long and short trade and the
//! site's `M` is filed into the profit or loss histogram of each side. A side
//! is tradable when the profit and loss distributions are far apart in
//! Kullback-Leibler terms and the realized learning returns pass the
//! skewness and Sharpe filters; individual momentum bins are tradable when
//! profits dominate losses there.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestConfig, BacktestReport, Direction, OrderSignal};
use crate::error::{Error, Result};
use crate::marketdata::{PriceSeries, TickSeries};
use crate::metrics::{self, kl_divergence, Histogram, KL_PSEUDO_COUNT};
use crate::optimize::with_workers;
use crate::stringmap::standardize;

/// Periodic reference shape the standardized window is compared against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Template {
    /// `½(1 + cos(2π m h / (ls + 1) + φ))`
    #[default]
    Cosine,
}

impl Template {
    /// Template value at `h`; always within `[0, 1]`.
    pub fn value(self, h: usize, ls: usize, m: u32, phi: f64) -> f64 {
        match self {
            Template::Cosine => {
                let arg = 2.0 * std::f64::consts::PI * m as f64 * h as f64 / (ls + 1) as f64 + phi;
                0.5 * (1.0 + arg.cos())
            }
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "cosine" | "cos" => Ok(Template::Cosine),
            other => Err(Error::Parameter(format!("unknown template {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PmbcsParams {
    pub ls: usize,
    /// Template frequency.
    pub m: u32,
    pub q: f64,
    /// Template phase in radians.
    pub phi: f64,
    pub bins: usize,
    pub d_threshold: f64,
    /// Minimum smoothed profit/loss frequency ratio of a tradable bin.
    pub rho_min: f64,
    pub skew_min: f64,
    pub sharpe_min: f64,
    pub max_positions: usize,
    pub hourly_cap: usize,
    /// Maximum holding period in ticks.
    pub horizon: usize,
    /// Samples a bin must hold before it may be tradable.
    pub min_occupancy: u64,
    pub template: Template,
}

impl Default for PmbcsParams {
    fn default() -> Self {
        Self {
            ls: 100,
            m: 1,
            q: 1.0,
            phi: 0.0,
            bins: 50,
            d_threshold: 0.05,
            rho_min: 1.5,
            skew_min: f64::NEG_INFINITY,
            sharpe_min: f64::NEG_INFINITY,
            max_positions: 10,
            hourly_cap: 10,
            horizon: 1000,
            min_occupancy: 20,
            template: Template::Cosine,
        }
    }
}

impl PmbcsParams {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Parameter(m));
        if self.ls < 2 {
            return fail(format!("ls must be >= 2, got {}", self.ls));
        }
        if self.m < 1 {
            return fail("template frequency m must be >= 1".into());
        }
        if !(self.q > 0.0 && self.q.is_finite()) {
            return fail(format!("Q must be positive, got {}", self.q));
        }
        if self.bins < 2 {
            return fail(format!("need at least 2 bins, got {}", self.bins));
        }
        if self.max_positions < 1 || self.hourly_cap < 1 || self.horizon < 1 {
            return fail("max_positions, hourly_cap and horizon must be >= 1".into());
        }
        if self.rho_min.is_nan() || self.d_threshold.is_nan() || self.skew_min.is_nan() || self.sharpe_min.is_nan() {
            return fail("thresholds must not be NaN".into());
        }
        Ok(())
    }

    /// Backtest settings with this parameter set's caps and holding period.
    pub fn backtest_config(&self, base: &BacktestConfig) -> BacktestConfig {
        BacktestConfig {
            max_positions: self.max_positions,
            hourly_cap: self.hourly_cap,
            horizon: self.horizon,
            ..*base
        }
    }

    fn empty_histogram(&self) -> Histogram {
        Histogram::uniform(self.bins, 0.0, 1.0).expect("bins validated")
    }
}

/// Momentum of a window of `ls + 1` prices.
pub fn momentum(window: &[f64], p: &PmbcsParams) -> Result<f64> {
    p.validate()?;
    if window.len() != p.ls + 1 {
        return Err(Error::Parameter(format!("window has {} prices, expected ls + 1 = {}", window.len(), p.ls + 1)));
    }
    momentum_unchecked(window, p)
}

fn momentum_unchecked(window: &[f64], p: &PmbcsParams) -> Result<f64> {
    let stand = standardize(window)?;
    let sum: f64 = stand
        .iter()
        .enumerate()
        .map(|(h, &v)| (v - p.template.value(h, p.ls, p.m, p.phi)).abs().powf(p.q))
        .sum();
    Ok((sum / (p.ls + 1) as f64).powf(1.0 / p.q))
}

/// Outcome of the hypothetical long and short trades opened at one site.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SiteOutcome {
    pub index: usize,
    pub momentum: f64,
    pub long_return: f64,
    pub short_return: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentumStats {
    pub long_profit: Histogram,
    pub long_loss: Histogram,
    pub short_profit: Histogram,
    pub short_loss: Histogram,
    pub long_returns: Vec<f64>,
    pub short_returns: Vec<f64>,
    pub sites: Vec<SiteOutcome>,
}

impl MomentumStats {
    pub fn empty(p: &PmbcsParams) -> Self {
        let h = p.empty_histogram();
        Self {
            long_profit: h.clone(),
            long_loss: h.clone(),
            short_profit: h.clone(),
            short_loss: h,
            long_returns: Vec::new(),
            short_returns: Vec::new(),
            sites: Vec::new(),
        }
    }

    pub fn profit_loss(&self, dir: Direction) -> (&Histogram, &Histogram) {
        match dir {
            Direction::Long => (&self.long_profit, &self.long_loss),
            Direction::Short => (&self.short_profit, &self.short_loss),
        }
    }

    /// Realized learning-phase returns of closed trades on one side.
    pub fn realized_returns(&self, dir: Direction) -> &[f64] {
        match dir {
            Direction::Long => &self.long_returns,
            Direction::Short => &self.short_returns,
        }
    }

    pub fn record(&mut self, site: SiteOutcome) {
        let m = site.momentum;
        if site.long_return > 0.0 { self.long_profit.add(m) } else { self.long_loss.add(m) };
        if site.short_return > 0.0 { self.short_profit.add(m) } else { self.short_loss.add(m) };
        self.long_returns.push(site.long_return);
        self.short_returns.push(site.short_return);
        self.sites.push(site);
    }
}

/// Learns momentum statistics over `s` with per-tick spreads.
///
/// A site is every tick `τ` whose window `τ-ls..=τ` is complete and whose
/// trades can run the full `horizon`: a long opened at the ask of `τ` and
/// closed at the bid of `τ + horizon`, a short the other way round. Returns
/// are relative to the entry price; zero counts as a loss. Constant windows
/// carry no momentum and are skipped.
pub fn accumulate_stats(s: &PriceSeries, spreads: &[f64], p: &PmbcsParams) -> Result<MomentumStats> {
    p.validate()?;
    if spreads.len() != s.len() {
        return Err(Error::Parameter(format!("{} spreads for {} prices", spreads.len(), s.len())));
    }
    let n = s.len();
    if n < p.ls + p.horizon + 1 {
        return Err(Error::Bounds { needed: p.ls + p.horizon + 1, available: n });
    }
    let v = &s.values;
    let mut stats = MomentumStats::empty(p);
    for tau in p.ls..n - p.horizon {
        let Ok(m) = momentum_unchecked(&v[tau - p.ls..=tau], p) else { continue };
        let exit = tau + p.horizon;
        let (bid_in, ask_in) = (v[tau] - spreads[tau] / 2.0, v[tau] + spreads[tau] / 2.0);
        let (bid_out, ask_out) = (v[exit] - spreads[exit] / 2.0, v[exit] + spreads[exit] / 2.0);
        stats.record(SiteOutcome {
            index: s.origin_index + tau,
            momentum: m,
            long_return: (bid_out - ask_in) / ask_in,
            short_return: (bid_in - ask_out) / bid_in,
        });
    }
    Ok(stats)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GateDiagnostics {
    pub passed: bool,
    pub dkl: f64,
    pub skewness: Option<f64>,
    pub sharpe: Option<f64>,
    pub reason: String,
}

/// Decides whether one side is tradable at all.
pub fn opportunity_gate(stats: &MomentumStats, dir: Direction, p: &PmbcsParams) -> GateDiagnostics {
    let (profit, loss) = stats.profit_loss(dir);
    let dkl = kl_divergence(profit, loss).unwrap_or(f64::NAN);
    let returns = stats.realized_returns(dir);
    let skew = metrics::skewness(returns).ok();
    let sharpe = metrics::sharpe(returns, 0.0).ok();
    let mut failures = Vec::new();
    if !(dkl > p.d_threshold) {
        failures.push(format!("dkl {dkl:.6} <= threshold {}", p.d_threshold));
    }
    match skew {
        None => failures.push("skewness undefined".to_string()),
        Some(s) if s < p.skew_min => failures.push(format!("skewness {s:.4} < {}", p.skew_min)),
        _ => {}
    }
    match sharpe {
        None => failures.push("sharpe undefined".to_string()),
        Some(s) if s < p.sharpe_min => failures.push(format!("sharpe {s:.4} < {}", p.sharpe_min)),
        _ => {}
    }
    GateDiagnostics {
        passed: failures.is_empty(),
        dkl,
        skewness: skew,
        sharpe,
        reason: if failures.is_empty() { "passed".into() } else { failures.join("; ") },
    }
}

/// Bins whose smoothed profit/loss frequency ratio reaches `rho_min` and
/// that hold at least `min_occupancy` samples, in ascending order.
pub fn good_bins(stats: &MomentumStats, dir: Direction, p: &PmbcsParams) -> Vec<usize> {
    let (profit, loss) = stats.profit_loss(dir);
    let pp = profit.smoothed(KL_PSEUDO_COUNT);
    let pl = loss.smoothed(KL_PSEUDO_COUNT);
    (0..profit.bins())
        .filter(|&j| {
            let occupancy = profit.counts[j] + loss.counts[j];
            occupancy >= p.min_occupancy && occupancy > 0 && pp[j] / pl[j] >= p.rho_min
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Signal {
    pub index: usize,
    pub direction: Option<Direction>,
    pub momentum: f64,
    pub bin: Option<usize>,
    pub dkl: f64,
    pub reason: String,
}

impl Signal {
    pub fn order(&self) -> Option<OrderSignal> {
        self.direction.map(|direction| OrderSignal { index: self.index, direction })
    }
}

/// Gate outcomes and tradable bins frozen after learning.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    pub params: PmbcsParams,
    pub long_gate: GateDiagnostics,
    pub short_gate: GateDiagnostics,
    pub long_good: Vec<bool>,
    pub short_good: Vec<bool>,
}

impl SignalModel {
    pub fn learn(stats: &MomentumStats, p: &PmbcsParams) -> Self {
        let mask = |dir: Direction, gate: &GateDiagnostics| {
            let mut m = vec![false; p.bins];
            if gate.passed {
                for j in good_bins(stats, dir, p) {
                    m[j] = true;
                }
            }
            m
        };
        let long_gate = opportunity_gate(stats, Direction::Long, p);
        let short_gate = opportunity_gate(stats, Direction::Short, p);
        Self {
            params: *p,
            long_good: mask(Direction::Long, &long_gate),
            short_good: mask(Direction::Short, &short_gate),
            long_gate,
            short_gate,
        }
    }

    pub fn tradable(&self) -> bool {
        self.long_good.iter().chain(&self.short_good).any(|&b| b)
    }

    /// Signal for the window ending at tick `index`.
    pub fn signal(&self, window: &[f64], index: usize) -> Signal {
        let p = &self.params;
        let m = if window.len() == p.ls + 1 {
            momentum_unchecked(window, p)
        } else {
            Err(Error::Parameter(format!("window has {} prices, expected {}", window.len(), p.ls + 1)))
        };
        let m = match m {
            Ok(m) => m,
            Err(e) => {
                return Signal { index, direction: None, momentum: f64::NAN, bin: None, dkl: f64::NAN, reason: e.to_string() }
            }
        };
        let bin = ((m * p.bins as f64) as usize).min(p.bins - 1);
        let (long, short) = (self.long_good[bin], self.short_good[bin]);
        let (direction, dkl, reason) = match (long, short) {
            (true, false) => (Some(Direction::Long), self.long_gate.dkl, "long bin".to_string()),
            (false, true) => (Some(Direction::Short), self.short_gate.dkl, "short bin".to_string()),
            (true, true) => (None, self.long_gate.dkl.max(self.short_gate.dkl), "conflict: both sides".to_string()),
            (false, false) => (
                None,
                self.long_gate.dkl.max(self.short_gate.dkl),
                format!("no good bin (long: {}; short: {})", self.long_gate.reason, self.short_gate.reason),
            ),
        };
        Signal { index, direction, momentum: m, bin: Some(bin), dkl, reason }
    }

    /// Signals for every tick in `[start, end)` of `s` with a complete window.
    pub fn signals(&self, s: &PriceSeries, start: usize, end: usize) -> Vec<Signal> {
        let ls = self.params.ls;
        (start.max(ls)..end.min(s.len()))
            .map(|t| self.signal(&s.values[t - ls..=t], s.origin_index + t))
            .collect()
    }
}

/// Signal for one window given learned statistics.
pub fn generate_signal(window: &[f64], stats: &MomentumStats, p: &PmbcsParams) -> Signal {
    SignalModel::learn(stats, p).signal(window, 0)
}

pub fn write_signals_csv<W: std::io::Write>(signals: &[Signal], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
    w.write_record(["index", "M", "direction", "bin", "dkl"]).map_err(err)?;
    for s in signals {
        w.write_record(&[
            s.index.to_string(),
            s.momentum.to_string(),
            s.direction.map_or("none", Direction::as_str).to_string(),
            s.bin.map_or(String::new(), |b| b.to_string()),
            s.dkl.to_string(),
        ])
        .map_err(err)?;
    }
    w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
}

/// Learns on `ticks` and trades the same ticks. Used to score parameter sets.
pub fn in_sample_run(ticks: &TickSeries, p: &PmbcsParams, base: &BacktestConfig) -> Result<BacktestReport> {
    let mids = ticks.mid_prices();
    let stats = accumulate_stats(&mids, &ticks.spreads(), p)?;
    let model = SignalModel::learn(&stats, p);
    let orders: Vec<OrderSignal> = model.signals(&mids, 0, mids.len()).iter().filter_map(Signal::order).collect();
    run_backtest(ticks, &orders, &p.backtest_config(base))
}

/// Sharpe-then-profit score; unscorable runs rank last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionScore {
    pub sharpe: f64,
    pub profit_pct: f64,
}

impl SelectionScore {
    pub const WORST: SelectionScore = SelectionScore { sharpe: f64::NEG_INFINITY, profit_pct: f64::NEG_INFINITY };

    pub fn of(report: &BacktestReport) -> Self {
        Self { sharpe: report.sharpe.unwrap_or(f64::NEG_INFINITY), profit_pct: report.final_profit_pct }
    }

    /// True when `self` ranks strictly above `other`.
    pub fn beats(&self, other: &SelectionScore) -> bool {
        match self.sharpe.total_cmp(&other.sharpe) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => self.profit_pct.total_cmp(&other.profit_pct).is_gt(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EducationWindow {
    pub learn_start: usize,
    pub trade_start: usize,
    pub trade_end: usize,
    pub params: PmbcsParams,
    /// Grid position of the chosen parameters.
    pub grid_index: usize,
    pub score: SelectionScore,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfEducation {
    pub windows: Vec<EducationWindow>,
    pub signals: Vec<Signal>,
    /// Backtest over the concatenated trade windows.
    pub report: BacktestReport,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub learn_len: usize,
    pub trade_len: usize,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { learn_len: 100_000, trade_len: 20_000 }
    }
}

/// Rolling re-optimization: for each trade window, every grid point is
/// scored in-sample on the preceding `learn_len` ticks, the best one under
/// Sharpe-then-profit (earlier grid position on exact ties) is learned on
/// that window and trades the next `trade_len` ticks.
pub fn self_educate(
    ticks: &TickSeries,
    grid: &[PmbcsParams],
    schedule: Schedule,
    base: &BacktestConfig,
    workers: Option<usize>,
) -> Result<SelfEducation> {
    if grid.is_empty() {
        return Err(Error::Parameter("parameter grid is empty".into()));
    }
    for p in grid {
        p.validate()?;
    }
    let Schedule { learn_len, trade_len } = schedule;
    if learn_len == 0 || trade_len == 0 {
        return Err(Error::Parameter("learn and trade lengths must be positive".into()));
    }
    let n = ticks.len();
    if n < learn_len + trade_len {
        return Err(Error::Bounds { needed: learn_len + trade_len, available: n });
    }
    let mids = ticks.mid_prices();
    let spreads = ticks.spreads();
    let mut windows = Vec::new();
    let mut signals = Vec::new();

    let mut trade_start = learn_len;
    while trade_start < n {
        let learn_start = trade_start - learn_len;
        let trade_end = (trade_start + trade_len).min(n);
        let learn_ticks = ticks.slice(learn_start, trade_start);
        let scores: Vec<SelectionScore> = with_workers(workers, || {
            grid.par_iter()
                .map(|p| in_sample_run(&learn_ticks, p, base).map_or(SelectionScore::WORST, |r| SelectionScore::of(&r)))
                .collect()
        });
        let mut best = 0;
        for (i, s) in scores.iter().enumerate().skip(1) {
            if s.beats(&scores[best]) {
                best = i;
            }
        }
        let params = grid[best];
        let learn_mids = PriceSeries::with_origin(mids.values[learn_start..trade_start].to_vec(), learn_start);
        // a learn window too short for the chosen params yields an untradable model
        let model = match accumulate_stats(&learn_mids, &spreads[learn_start..trade_start], &params) {
            Ok(stats) => Some(SignalModel::learn(&stats, &params)),
            Err(_) => None,
        };
        if let Some(model) = model {
            signals.extend(model.signals(&mids, trade_start, trade_end));
        }
        windows.push(EducationWindow { learn_start, trade_start, trade_end, params, grid_index: best, score: scores[best] });
        trade_start = trade_end;
    }

    let trade_ticks = ticks.slice(learn_len, n);
    let orders: Vec<OrderSignal> = signals
        .iter()
        .filter_map(Signal::order)
        .map(|o| OrderSignal { index: o.index - learn_len, ..o })
        .collect();
    let first = windows[0].params;
    let report = run_backtest(&trade_ticks, &orders, &first.backtest_config(base))?;
    Ok(SelfEducation { windows, signals, report })
}
