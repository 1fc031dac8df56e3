//! End-to-end pipelines on synthetic data: the sinusoid forecasting study
//! and a random-walk momentum trading run.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::backtest::{run_backtest, BacktestConfig, Direction, OrderSignal};
use crate::error::{Error, Result};
use crate::marketdata::{gen_random_walk_ticks, gen_sinusoid, PriceSeries, TickQuote, TickSeries};
use crate::metrics::{self, ErrorReport};
use crate::optimize::{
    eta_values, grid_search, pmbsi_from_point, select_best, Constraint, Evaluation, GridPoint, ParameterGrid,
    SearchOutcome, SelectionRule, Sense,
};
use crate::pmbcs::{self_educate, PmbcsParams, Schedule, SelfEducation};
use crate::pmbsi::{run_forecasts, ForecastMode, ForecastRun, PmbsiParams, ShiftRule};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidConfig {
    pub n: usize,
    pub amplitude: f64,
    pub phase: f64,
    /// Leading fraction used for parameter selection; the rest is validation.
    pub train_frac: f64,
    pub shift: ShiftRule,
    pub horizons: Vec<usize>,
    pub grid: ParameterGrid,
    pub workers: Option<usize>,
}

impl Default for SinusoidConfig {
    fn default() -> Self {
        Self {
            n: 51,
            amplitude: 1.0,
            phase: 0.0,
            train_frac: 0.5,
            shift: ShiftRule::Auto,
            horizons: vec![1, 2, 3],
            grid: sinusoid_grid(),
            workers: None,
        }
    }
}

/// Forecasting grid sized for a 51-point series: ls 2..10, eight Q values,
/// nine values per mixing weight, three W0 levels.
pub fn sinusoid_grid() -> ParameterGrid {
    ParameterGrid::new()
        .axis("ls", (2..=10).map(f64::from).collect())
        .and_then(|g| g.axis("q", vec![0.1, 0.2, 0.3, 0.5, 1.0, 2.0, 3.0, 6.0]))
        .and_then(|g| g.axis("eta1", eta_values()))
        .and_then(|g| g.axis("eta2", eta_values()))
        .and_then(|g| g.axis("w0", vec![0.0, 0.25, 0.5]))
        .expect("static grid is valid")
}

/// 6 x 6 x 6 x 6 = 1296-point grid over ls, Q and both mixing weights.
pub fn desk_grid() -> ParameterGrid {
    ParameterGrid::new()
        .axis("ls", (2..=7).map(f64::from).collect())
        .and_then(|g| g.axis("q", vec![0.1, 0.2, 0.3, 0.5, 1.0, 2.0]))
        .and_then(|g| g.axis("eta1", vec![-0.8, -0.4, 0.0, 0.4, 0.6, 0.8]))
        .and_then(|g| g.axis("eta2", vec![-0.8, -0.6, -0.2, 0.0, 0.4, 0.8]))
        .expect("static grid is valid")
}

pub fn canonical_sinusoid(cfg: &SinusoidConfig) -> Result<PriceSeries> {
    gen_sinusoid(cfg.n, cfg.amplitude, 0.0, cfg.phase)
}

/// Number of leading points reserved for parameter selection.
pub fn train_len(n: usize, train_frac: f64) -> usize {
    (train_frac * n as f64).floor() as usize
}

pub fn forecast_mode(p: PmbsiParams, l_pr: usize, iterated: bool) -> ForecastMode {
    if iterated {
        ForecastMode::Iterated { params: PmbsiParams { l_pr: 1, ..p }, steps: l_pr }
    } else {
        ForecastMode::Direct(PmbsiParams { l_pr, ..p })
    }
}

/// In-sample targets below `n_train` that have full history for `mode`.
pub fn selection_targets(mode: &ForecastMode, n_train: usize) -> Vec<usize> {
    (mode.first_target().max(mode.horizon() + 1)..n_train).collect()
}

/// Mean absolute error of `mode` over in-sample targets of `s`.
pub fn in_sample_mae(s: &PriceSeries, n_train: usize, mode: &ForecastMode, shift: ShiftRule) -> Result<ForecastRun> {
    let targets = selection_targets(mode, n_train);
    if targets.is_empty() {
        return Err(Error::Bounds { needed: mode.first_target() + 1, available: n_train });
    }
    run_forecasts(s, &targets, mode, shift)
}

/// Grid objective: in-sample MAE of direct or iterated forecasts.
pub fn mae_objective(
    s: &PriceSeries,
    n_train: usize,
    l_pr: usize,
    iterated: bool,
    shift: ShiftRule,
) -> impl Fn(&GridPoint) -> Result<Evaluation> + Sync + '_ {
    move |point| {
        let p = pmbsi_from_point(point, PmbsiParams { l_pr: if iterated { 1 } else { l_pr }, ..Default::default() })?;
        let run = in_sample_mae(s, n_train, &forecast_mode(p, l_pr, iterated), shift)?;
        let mae = metrics::mae(&run.actuals(), &run.forecasts())?;
        Ok(Evaluation::new(mae).with("mae", mae).with("invalid", run.invalid_count() as f64))
    }
}

/// Quotes built from a price series plus a constant, one per minute.
pub fn series_ticks(s: &PriceSeries, shift: f64, spread: f64) -> Result<TickSeries> {
    let ticks = s
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| TickQuote::new(i as i64 * 60_000, v + shift - spread / 2.0, v + shift + spread / 2.0))
        .collect::<Result<Vec<_>>>()?;
    Ok(TickSeries::new(ticks))
}

/// Opens in the direction of each forecast relative to the last observed
/// price; flat forecasts give no order.
pub fn forecast_orders(s: &PriceSeries, run: &ForecastRun, horizon: usize) -> Vec<OrderSignal> {
    run.rows
        .iter()
        .filter_map(|r| {
            let at = r.index - s.origin_index - horizon;
            let base = s.values[at];
            let direction = if r.forecast > base {
                Direction::Long
            } else if r.forecast < base {
                Direction::Short
            } else {
                return None;
            };
            Some(OrderSignal { index: at, direction })
        })
        .collect()
}

/// Grid objective for trading on forecasts: in-sample MAE, with the
/// profit, drawdown and Sharpe of a forecast-driven backtest as metrics.
pub fn trading_objective<'a>(
    s: &'a PriceSeries,
    n_train: usize,
    l_pr: usize,
    shift: ShiftRule,
    bt: &'a BacktestConfig,
) -> impl Fn(&GridPoint) -> Result<Evaluation> + Sync + 'a {
    move |point| {
        let p = pmbsi_from_point(point, PmbsiParams { l_pr, ..Default::default() })?;
        let mode = forecast_mode(p, l_pr, false);
        let run = in_sample_mae(s, n_train, &mode, shift)?;
        let mae = metrics::mae(&run.actuals(), &run.forecasts())?;
        let ticks = series_ticks(&PriceSeries::new(s.values[..n_train].to_vec()), run.shift, 0.0)?;
        let orders = forecast_orders(s, &run, l_pr);
        let report = run_backtest(&ticks, &orders, &BacktestConfig { horizon: l_pr, ..*bt })?;
        Ok(Evaluation::new(mae)
            .with("mae", mae)
            .with("profit_pct", report.final_profit_pct)
            .with("max_drawdown_pct", report.max_drawdown_pct)
            .with("sharpe", report.sharpe.unwrap_or(f64::NAN))
            .with("trades", report.trade_count as f64))
    }
}

/// Trading search with a drawdown ceiling in percent.
pub fn trading_search(
    s: &PriceSeries,
    grid: &ParameterGrid,
    l_pr: usize,
    bt: &BacktestConfig,
    max_drawdown_pct: f64,
    workers: Option<usize>,
) -> Result<SearchOutcome> {
    let n_train = train_len(s.len(), 0.5);
    let constraints = [Constraint::at_most("max_drawdown_pct", max_drawdown_pct)];
    grid_search(grid, trading_objective(s, n_train, l_pr, ShiftRule::Auto, bt), Sense::Minimize, &constraints, workers)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodRow {
    pub method: String,
    pub l_pr: usize,
    pub mae: f64,
    pub smape: Option<f64>,
    pub params: Option<PmbsiParams>,
    /// Validation targets whose forecast was substituted.
    pub invalid: usize,
    /// In-sample MAE of the chosen parameters.
    pub selection_mae: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinusoidReport {
    pub n: usize,
    pub n_train: usize,
    pub shift: f64,
    pub validation_targets: Vec<usize>,
    pub rows: Vec<MethodRow>,
    pub evaluations: usize,
}

impl SinusoidReport {
    pub fn row(&self, method: &str, l_pr: usize) -> Option<&MethodRow> {
        self.rows.iter().find(|r| r.method == method && r.l_pr == l_pr)
    }

    /// Fixed-width table: method, horizon, MAE, SMAPE, parameters.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<10} {:>4} {:>12} {:>12}  ls/Q/eta1/eta2/W0", "method", "l_pr", "MAE", "SMAPE");
        for r in &self.rows {
            let smape = r.smape.map_or("-".to_string(), |v| format!("{v:.6}"));
            let params = r.params.map_or("-".to_string(), |p| format!("{}/{}/{}/{}/{}", p.ls, p.q, p.eta1, p.eta2, p.w0));
            let _ = writeln!(s, "{:<10} {:>4} {:>12.6} {:>12}  {}", r.method, r.l_pr, r.mae, smape, params);
        }
        s
    }
}

fn validation_row(
    s: &PriceSeries,
    targets: &[usize],
    method: &str,
    l_pr: usize,
    mode: &ForecastMode,
    shift: ShiftRule,
) -> Result<MethodRow> {
    let run = run_forecasts(s, targets, mode, shift)?;
    let report = ErrorReport::compute(&run.actuals(), &run.forecasts())?;
    let smape = metrics::smape(&run.actuals(), &run.forecasts()).ok();
    Ok(MethodRow {
        method: method.into(),
        l_pr,
        mae: report.mae,
        smape,
        params: None,
        invalid: run.invalid_count(),
        selection_mae: None,
    })
}

/// Generates the sinusoid, selects forecasting parameters per horizon on
/// the leading part by in-sample MAE and reports validation errors of the
/// naive, direct and iterated forecasts on the remainder.
pub fn reproduce_sinusoid(cfg: &SinusoidConfig) -> Result<SinusoidReport> {
    let s = canonical_sinusoid(cfg)?;
    let n_train = train_len(cfg.n, cfg.train_frac);
    if n_train < 4 || n_train >= cfg.n {
        return Err(Error::Parameter(format!("train fraction {} leaves no usable split", cfg.train_frac)));
    }
    let targets: Vec<usize> = (n_train..cfg.n).collect();
    let mut rows = Vec::new();
    let mut evaluations = 0;
    for &l_pr in &cfg.horizons {
        let (actual, forecast) = metrics::naive_forecast_at(&s, &targets, l_pr)?;
        rows.push(MethodRow {
            method: "naive".into(),
            l_pr,
            mae: metrics::mae(&actual, &forecast)?,
            smape: metrics::smape(&actual, &forecast).ok(),
            params: None,
            invalid: 0,
            selection_mae: None,
        });
    }
    for &l_pr in &cfg.horizons {
        for iterated in [false, true] {
            if iterated && l_pr == 1 {
                continue;
            }
            let outcome =
                grid_search(&cfg.grid, mae_objective(&s, n_train, l_pr, iterated, cfg.shift), Sense::Minimize, &[], cfg.workers)?;
            evaluations += outcome.evaluations;
            let best = select_best(&outcome.results, SelectionRule::EvalMae, false)?;
            let p = pmbsi_from_point(&best.params, PmbsiParams { l_pr: if iterated { 1 } else { l_pr }, ..Default::default() })?;
            let mode = forecast_mode(p, l_pr, iterated);
            let method = if iterated { "iterated" } else { "direct" };
            let row = validation_row(&s, &targets, method, l_pr, &mode, cfg.shift)?;
            rows.push(MethodRow { params: Some(p), selection_mae: Some(best.objective), ..row });
        }
    }
    Ok(SinusoidReport { n: cfg.n, n_train, shift: cfg.shift.constant_for(&s), validation_targets: targets, rows, evaluations })
}

/// Validation MAE of fixed parameters on the sinusoid.
pub fn sinusoid_validation_mae(cfg: &SinusoidConfig, mode: &ForecastMode) -> Result<f64> {
    let s = canonical_sinusoid(cfg)?;
    let n_train = train_len(cfg.n, cfg.train_frac);
    let targets: Vec<usize> = (n_train..cfg.n).collect();
    let run = run_forecasts(&s, &targets, mode, cfg.shift)?;
    metrics::mae(&run.actuals(), &run.forecasts())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmokeConfig {
    pub ticks: usize,
    pub seed: u64,
    pub volatility: f64,
    pub spread: f64,
    pub schedule: Schedule,
    pub grid: Vec<PmbcsParams>,
    pub backtest: BacktestConfig,
    pub workers: Option<usize>,
}

impl Default for SmokeConfig {
    fn default() -> Self {
        let base = PmbcsParams { ls: 30, horizon: 40, bins: 20, min_occupancy: 10, d_threshold: 0.0, rho_min: 1.1, ..Default::default() };
        Self {
            ticks: 6_000,
            seed: 42,
            volatility: 2e-4,
            spread: 2e-5,
            schedule: Schedule { learn_len: 3_000, trade_len: 1_000 },
            grid: vec![base, PmbcsParams { q: 2.0, ..base }, PmbcsParams { ls: 50, m: 2, ..base }],
            backtest: BacktestConfig::default(),
            workers: None,
        }
    }
}

/// Learn, trade and report on a seeded random walk.
pub fn random_walk_smoke(cfg: &SmokeConfig) -> Result<(TickSeries, SelfEducation)> {
    let ticks = gen_random_walk_ticks(cfg.ticks, 1.3, cfg.volatility, cfg.spread, 1_000, cfg.seed);
    let out = self_educate(&ticks, &cfg.grid, cfg.schedule, &cfg.backtest, cfg.workers)?;
    Ok((ticks, out))
}
