//! Tick-by-tick execution of directional signals.
//!
//! Longs open at the ask and close at the bid, shorts open at the bid and
//! close at the ask, so the quoted spread is paid on every round trip. Each
//! position is sized as a fixed fraction of the *initial* equity times the
//! leverage, which keeps profit and drawdown linear in leverage.
//!
//! On every tick, exits are processed before entries. A position closes at
//! the first of: an opposite-direction signal, `horizon` ticks elapsed, or
//! the last tick. No position is opened on the last tick.

use std::collections::VecDeque;

use chrono::DateTime;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::marketdata::{TickQuote, TickSeries};
use crate::metrics;

pub const MS_PER_HOUR: i64 = 3_600_000;
pub const MS_PER_DAY: i64 = 86_400_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Long,
    Short,
}

impl Direction {
    pub fn opposite(self) -> Self {
        match self {
            Direction::Long => Direction::Short,
            Direction::Short => Direction::Long,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Long => "long",
            Direction::Short => "short",
        }
    }

    /// Executed open price for this side.
    pub fn entry_price(self, q: &TickQuote) -> f64 {
        match self {
            Direction::Long => q.ask,
            Direction::Short => q.bid,
        }
    }

    /// Executed close price for this side.
    pub fn exit_price(self, q: &TickQuote) -> f64 {
        match self {
            Direction::Long => q.bid,
            Direction::Short => q.ask,
        }
    }

    /// Profit per unit for a round trip between two quotes.
    pub fn unit_pnl(self, open: &TickQuote, close: &TickQuote) -> f64 {
        match self {
            Direction::Long => close.bid - open.ask,
            Direction::Short => open.bid - close.ask,
        }
    }
}

/// Request to open one position at tick `index`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OrderSignal {
    pub index: usize,
    pub direction: Direction,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub direction: Direction,
    pub open_index: usize,
    pub close_index: usize,
    pub open_price: f64,
    pub close_price: f64,
    pub units: f64,
    /// Gross profit in quote currency, before commission.
    pub pnl: f64,
    pub commission: f64,
    pub close_timestamp: i64,
}

impl Trade {
    pub fn net_pnl(&self) -> f64 {
        self.pnl - self.commission
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BacktestConfig {
    pub initial_equity: f64,
    pub leverage: f64,
    /// Fraction of initial equity committed per position, before leverage.
    pub position_fraction: f64,
    pub max_positions: usize,
    /// Maximum openings in any sliding one-hour window.
    pub hourly_cap: usize,
    /// Cost charged once per round trip, in quote currency.
    pub commission: f64,
    /// Maximum holding period in ticks.
    pub horizon: usize,
    pub close_on_opposite: bool,
    /// Abort when realized equity drops to zero or below.
    pub stop_on_ruin: bool,
    /// Benchmark return per trade for the Sharpe ratio.
    pub benchmark_return: f64,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            initial_equity: 10_000.0,
            leverage: 1.0,
            position_fraction: 0.1,
            max_positions: 10,
            hourly_cap: 10,
            commission: 0.0,
            horizon: 1000,
            close_on_opposite: true,
            stop_on_ruin: true,
            benchmark_return: 0.0,
        }
    }
}

impl BacktestConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: &str| Err(Error::Parameter(m.to_string()));
        if !(self.initial_equity > 0.0) {
            return fail("initial equity must be positive");
        }
        if !(self.leverage > 0.0) {
            return fail("leverage must be positive");
        }
        if !(self.position_fraction > 0.0 && self.position_fraction <= 1.0) {
            return fail("position fraction must lie in (0, 1]");
        }
        if self.max_positions == 0 || self.hourly_cap == 0 {
            return fail("position and hourly caps must be at least 1");
        }
        if self.horizon == 0 {
            return fail("horizon must be at least one tick");
        }
        if !(self.commission >= 0.0) {
            return fail("commission must be non-negative");
        }
        Ok(())
    }

    fn notional(&self) -> f64 {
        self.position_fraction * self.initial_equity * self.leverage
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DayEquity {
    /// Days since 1970-01-01 (UTC).
    pub day: i64,
    pub equity: f64,
}

impl DayEquity {
    pub fn date_string(&self) -> String {
        DateTime::from_timestamp_millis(self.day * MS_PER_DAY)
            .map(|d| d.format("%Y-%m-%d").to_string())
            .unwrap_or_else(|| self.day.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BacktestReport {
    pub config: BacktestConfig,
    pub trades: Vec<Trade>,
    /// Initial equity followed by the equity after each closed trade.
    pub equity_by_trade: Vec<f64>,
    pub equity_by_day: Vec<DayEquity>,
    pub final_equity: f64,
    pub final_profit_pct: f64,
    pub max_drawdown_pct: f64,
    pub sharpe: Option<f64>,
    pub trade_count: usize,
    /// Largest number of simultaneously open positions observed.
    pub peak_open_positions: usize,
}

impl BacktestReport {
    pub fn total_pnl(&self) -> f64 {
        self.trades.iter().map(|t| t.pnl).sum()
    }

    pub fn total_commission(&self) -> f64 {
        self.trades.iter().map(|t| t.commission).sum()
    }

    /// Net return of each trade relative to initial equity.
    pub fn trade_returns(&self) -> Vec<f64> {
        self.trades.iter().map(|t| t.net_pnl() / self.config.initial_equity).collect()
    }

    pub fn write_trades_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
        w.write_record(["open_idx", "close_idx", "dir", "open_px", "close_px", "units", "pnl"]).map_err(err)?;
        for t in &self.trades {
            w.write_record(&[
                t.open_index.to_string(),
                t.close_index.to_string(),
                t.direction.as_str().to_string(),
                t.open_price.to_string(),
                t.close_price.to_string(),
                t.units.to_string(),
                t.pnl.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }

    pub fn write_equity_by_trade_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
        w.write_record(["trade", "equity"]).map_err(err)?;
        for (i, e) in self.equity_by_trade.iter().enumerate() {
            w.write_record(&[i.to_string(), e.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }

    pub fn write_equity_by_day_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Parse { line: 0, message: e.to_string() };
        w.write_record(["date", "equity"]).map_err(err)?;
        for d in &self.equity_by_day {
            w.write_record(&[d.date_string(), d.equity.to_string()]).map_err(err)?;
        }
        w.flush().map_err(|e| Error::Parse { line: 0, message: e.to_string() })
    }
}

#[derive(Debug, Clone, Copy)]
struct OpenPosition {
    direction: Direction,
    open_index: usize,
    units: f64,
}

/// Runs the execution state machine over `ticks`.
pub fn run_backtest(ticks: &TickSeries, signals: &[OrderSignal], cfg: &BacktestConfig) -> Result<BacktestReport> {
    cfg.validate()?;
    let n = ticks.len();
    if let Some(bad) = signals.iter().find(|s| s.index >= n) {
        return Err(Error::Alignment { index: bad.index, len: n });
    }
    let mut ordered = signals.to_vec();
    ordered.sort_by_key(|s| s.index);

    let notional = cfg.notional();
    let mut open: Vec<OpenPosition> = Vec::with_capacity(cfg.max_positions);
    let mut recent_opens: VecDeque<i64> = VecDeque::new();
    let mut trades = Vec::new();
    let mut equity = cfg.initial_equity;
    let mut equity_by_trade = vec![equity];
    let mut peak_open = 0;
    let mut cursor = 0;

    for (i, quote) in ticks.ticks.iter().enumerate() {
        let start = cursor;
        while cursor < ordered.len() && ordered[cursor].index == i {
            cursor += 1;
        }
        let here = &ordered[start..cursor];
        let last_tick = i + 1 == n;

        let mut kept = Vec::with_capacity(open.len());
        for pos in open.drain(..) {
            let opposite = cfg.close_on_opposite && here.iter().any(|s| s.direction == pos.direction.opposite());
            if last_tick || opposite || i - pos.open_index >= cfg.horizon {
                let open_quote = &ticks.ticks[pos.open_index];
                let trade = Trade {
                    direction: pos.direction,
                    open_index: pos.open_index,
                    close_index: i,
                    open_price: pos.direction.entry_price(open_quote),
                    close_price: pos.direction.exit_price(quote),
                    units: pos.units,
                    pnl: pos.units * pos.direction.unit_pnl(open_quote, quote),
                    commission: cfg.commission,
                    close_timestamp: quote.timestamp,
                };
                equity += trade.net_pnl();
                equity_by_trade.push(equity);
                trades.push(trade);
                if cfg.stop_on_ruin && equity <= 0.0 {
                    return Err(Error::MarginCall { index: i, equity });
                }
            } else {
                kept.push(pos);
            }
        }
        open = kept;

        if last_tick {
            break;
        }
        for sig in here {
            while recent_opens.front().is_some_and(|&t| quote.timestamp - t >= MS_PER_HOUR) {
                recent_opens.pop_front();
            }
            if open.len() >= cfg.max_positions || recent_opens.len() >= cfg.hourly_cap {
                continue;
            }
            let price = sig.direction.entry_price(quote);
            open.push(OpenPosition { direction: sig.direction, open_index: i, units: notional / price });
            recent_opens.push_back(quote.timestamp);
            peak_open = peak_open.max(open.len());
        }
    }

    let equity_by_day = daily_equity(ticks, &trades, cfg.initial_equity);
    let final_equity = equity;
    let returns: Vec<f64> = trades.iter().map(|t| t.net_pnl() / cfg.initial_equity).collect();
    Ok(BacktestReport {
        config: *cfg,
        trade_count: trades.len(),
        sharpe: metrics::sharpe(&returns, cfg.benchmark_return).ok(),
        final_profit_pct: 100.0 * (final_equity - cfg.initial_equity) / cfg.initial_equity,
        max_drawdown_pct: 100.0 * max_drawdown(&equity_by_trade),
        final_equity,
        equity_by_trade,
        equity_by_day,
        trades,
        peak_open_positions: peak_open,
    })
}

fn daily_equity(ticks: &TickSeries, trades: &[Trade], initial: f64) -> Vec<DayEquity> {
    let (Some(first), Some(last)) = (ticks.ticks.first(), ticks.ticks.last()) else {
        return Vec::new();
    };
    let first_day = first.timestamp.div_euclid(MS_PER_DAY);
    let last_day = last.timestamp.div_euclid(MS_PER_DAY);
    let mut out = Vec::with_capacity((last_day - first_day + 1) as usize);
    let mut equity = initial;
    let mut k = 0;
    for day in first_day..=last_day {
        while k < trades.len() && trades[k].close_timestamp.div_euclid(MS_PER_DAY) <= day {
            equity += trades[k].net_pnl();
            k += 1;
        }
        out.push(DayEquity { day, equity });
    }
    out
}

/// Largest peak-to-trough decline as a fraction of the running peak.
pub fn max_drawdown(equity: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut worst = 0.0f64;
    for &e in equity {
        peak = peak.max(e);
        if peak > 0.0 {
            worst = worst.max((peak - e) / peak);
        }
    }
    worst
}

/// Per-trade and per-day equity curves of a report.
pub fn equity_curves(report: &BacktestReport) -> (Vec<f64>, Vec<DayEquity>) {
    (report.equity_by_trade.clone(), report.equity_by_day.clone())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeverageComparison {
    pub leverage_ratio: f64,
    /// Largest relative deviation of `pnl_b / pnl_a` from the leverage ratio.
    pub max_pnl_ratio_error: f64,
    pub profit_ratio: f64,
    pub drawdown_ratio: f64,
}

/// Compares two runs that differ only in leverage.
pub fn leverage_scaling_check(a: &BacktestReport, b: &BacktestReport) -> Result<LeverageComparison> {
    if a.trades.len() != b.trades.len() {
        return Err(Error::Parameter(format!(
            "runs differ in trade count ({} vs {})",
            a.trades.len(),
            b.trades.len()
        )));
    }
    let leverage_ratio = b.config.leverage / a.config.leverage;
    let mut max_err = 0.0f64;
    for (ta, tb) in a.trades.iter().zip(&b.trades) {
        if (ta.open_index, ta.close_index, ta.direction) != (tb.open_index, tb.close_index, tb.direction) {
            return Err(Error::Parameter("runs differ in trade sequence".into()));
        }
        if ta.pnl != 0.0 {
            max_err = max_err.max((tb.pnl / ta.pnl - leverage_ratio).abs() / leverage_ratio);
        } else if tb.pnl != 0.0 {
            max_err = f64::INFINITY;
        }
    }
    let ratio = |x: f64, y: f64| if x == 0.0 && y == 0.0 { leverage_ratio } else { y / x };
    Ok(LeverageComparison {
        leverage_ratio,
        max_pnl_ratio_error: max_err,
        profit_ratio: ratio(a.final_profit_pct, b.final_profit_pct),
        drawdown_ratio: ratio(a.max_drawdown_pct, b.max_drawdown_pct),
    })
}
