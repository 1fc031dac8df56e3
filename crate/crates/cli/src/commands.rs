use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, ValueEnum};
use serde_json::{json, Value};

use stringfx::backtest::{run_backtest, BacktestConfig, Direction, OrderSignal};
use stringfx::experiment::{
    self, mae_objective, reproduce_sinusoid, train_len, trading_objective, SinusoidConfig,
};
use stringfx::marketdata::{gen_random_walk_ticks, parse_series, parse_ticks, returns, PriceSeries, TickSeries};
use stringfx::metrics::{self, ErrorReport};
use stringfx::optimize::{
    error_surface, grid_search, pmbcs_from_point, pmbsi_from_point, select_best, write_results_csv, Constraint,
    ParameterGrid, SelectionRule, Sense,
};
use stringfx::pmbcs::{self_educate, write_signals_csv, PmbcsParams, Schedule, Template};
use stringfx::pmbsi::{directional_hit_rate, run_forecasts, ForecastMode, PmbsiParams, ShiftRule, SimpleInvariantParams};
use stringfx::stringmap::{compactify, standardize, string1, string2, StringWindowConfig};

use crate::config::Settings;
use crate::{Cli, Command, GlobalArgs, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

struct Io<'a> {
    global: &'a GlobalArgs,
}

impl Io<'_> {
    fn input(&self, path: &Path) -> PathBuf {
        match &self.global.data_dir {
            Some(dir) if path.is_relative() && !path.exists() => dir.join(path),
            _ => path.to_path_buf(),
        }
    }

    fn read(&self, path: &Path) -> Result<String> {
        let p = self.input(path);
        fs::read_to_string(&p).map_err(|e| usage(format!("cannot read input {}: {e}", p.display())))
    }

    fn output(&self, explicit: Option<&PathBuf>, default_name: &str) -> Result<PathBuf> {
        let p = explicit.cloned().unwrap_or_else(|| self.global.out_dir.join(default_name));
        if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
        Ok(p)
    }

    fn create(&self, explicit: Option<&PathBuf>, default_name: &str) -> Result<(PathBuf, fs::File)> {
        let p = self.output(explicit, default_name)?;
        let f = fs::File::create(&p).with_context(|| format!("creating {}", p.display()))?;
        Ok((p, f))
    }

    /// Series from `index,price` or mid prices from `timestamp,bid,ask`.
    fn prices(&self, path: &Path) -> Result<PriceSeries> {
        let text = self.read(path)?;
        let fields = text.lines().find(|l| !l.trim().is_empty()).map_or(0, |l| l.split(',').count());
        Ok(if fields == 3 { parse_ticks(&text)?.mid_prices() } else { parse_series(&text)? })
    }

    fn ticks(&self, path: &Path) -> Result<TickSeries> {
        Ok(parse_ticks(&self.read(path)?)?)
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

pub fn run(cli: &Cli) -> Result<Value> {
    let io = Io { global: &cli.global };
    let settings = Settings::load(cli.global.config.as_deref(), cli.command_section())?;
    match &cli.command {
        Command::Transform(a) => transform(&io, &settings, a),
        Command::Forecast(a) => forecast(&io, &settings, a),
        Command::Pmbcs(a) => pmbcs(&io, &settings, a),
        Command::Backtest(a) => backtest(&io, &settings, a),
        Command::Optimize(a) => optimize(&io, &settings, a),
        Command::Metrics(a) => metrics_cmd(&io, a),
        Command::ReproduceSinusoid(a) => reproduce(&io, &settings, a),
    }
}

impl Cli {
    fn command_section(&self) -> &'static str {
        match &self.command {
            Command::Transform(_) => "transform",
            Command::Forecast(_) => "forecast",
            Command::Pmbcs(_) => "pmbcs",
            Command::Backtest(_) => "backtest",
            Command::Optimize(_) => "optimize",
            Command::Metrics(_) => "metrics",
            Command::ReproduceSinusoid(_) => "reproduce-sinusoid",
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapKind {
    String1,
    String2,
    Compactify,
    Standardize,
    Returns,
}

#[derive(Args, Debug)]
pub struct TransformArgs {
    /// Price series (index,price) or ticks (timestamp_ms,bid,ask).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub map: MapKind,
    #[arg(long)]
    pub ls: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long)]
    pub nm: Option<usize>,
    /// Window start position.
    #[arg(long)]
    pub tau: Option<usize>,
    /// Lag for returns.
    #[arg(long)]
    pub lag: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn transform(io: &Io, cfg: &Settings, a: &TransformArgs) -> Result<Value> {
    let s = io.prices(&a.input)?;
    let win = StringWindowConfig::new(cfg.pick(a.ls, "ls", 10)?, cfg.pick(a.q, "q", 1.0)?, cfg.pick(a.nm, "nm", 1)?)?;
    let tau = cfg.pick(a.tau, "tau", 0)?;
    let (path, file) = io.create(a.output.as_ref(), "transform.csv")?;
    let count = match a.map {
        MapKind::String1 | MapKind::String2 => {
            let v = if a.map == MapKind::String1 { string1(&s, tau, &win)? } else { string2(&s, tau, &win)? };
            v.write_csv(file)?;
            v.values.len()
        }
        MapKind::Compactify => {
            let c = compactify(&s, &win, tau)?;
            c.write_csv(file)?;
            c.len()
        }
        MapKind::Standardize => {
            let end = (tau + win.ls + 1).min(s.len());
            if tau >= end {
                bail!(stringfx::Error::Bounds { needed: tau + 1, available: s.len() });
            }
            let v = standardize(&s.values[tau..end])?;
            let out = PriceSeries::with_origin(v, s.origin_index + tau);
            out.write_csv(file)?;
            out.len()
        }
        MapKind::Returns => {
            let r = returns(&s, cfg.pick(a.lag, "lag", 1)?)?;
            r.write_csv(file)?;
            r.len()
        }
    };
    Ok(json!({ "map": format!("{:?}", a.map).to_lowercase(), "ls": win.ls, "q": win.q, "nm": win.nm, "tau": tau, "values": count, "output": path_str(&path) }))
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// simple, direct or iterated.
    #[arg(long)]
    pub mode: Option<String>,
    #[arg(long)]
    pub ls: Option<usize>,
    #[arg(long)]
    pub l_pr: Option<usize>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub eta2: Option<f64>,
    #[arg(long)]
    pub w0: Option<f64>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Window length of the simple predictor.
    #[arg(long)]
    pub l: Option<usize>,
    #[arg(long)]
    pub l0: Option<usize>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// auto, none, or a constant added before forecasting.
    #[arg(long, allow_negative_numbers = true)]
    pub shift: Option<String>,
    /// First target position; defaults to the earliest with enough history.
    #[arg(long)]
    pub start: Option<usize>,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn parse_shift(text: &str) -> Result<ShiftRule> {
    Ok(match text {
        "auto" => ShiftRule::Auto,
        "none" => ShiftRule::None,
        k => ShiftRule::Constant(k.parse().map_err(|_| usage(format!("shift must be auto, none or a number, got {k:?}")))?),
    })
}

fn pmbsi_params(cfg: &Settings, a: &ForecastArgs) -> Result<PmbsiParams> {
    let d = PmbsiParams::default();
    let p = PmbsiParams {
        ls: cfg.pick(a.ls, "ls", d.ls)?,
        l_pr: cfg.pick(a.l_pr, "l_pr", d.l_pr)?,
        q: cfg.pick(a.q, "q", d.q)?,
        eta1: cfg.pick(a.eta1, "eta1", d.eta1)?,
        eta2: cfg.pick(a.eta2, "eta2", d.eta2)?,
        w0: cfg.pick(a.w0, "w0", d.w0)?,
        epsilon: cfg.pick(a.epsilon, "epsilon", d.epsilon)?,
    };
    p.validate()?;
    Ok(p)
}

fn forecast(io: &Io, cfg: &Settings, a: &ForecastArgs) -> Result<Value> {
    let s = io.prices(&a.input)?;
    let mode_name = cfg.pick(a.mode.clone(), "mode", "direct".to_string())?;
    let p = pmbsi_params(cfg, a)?;
    let mode = match mode_name.as_str() {
        "simple" => ForecastMode::Simple(SimpleInvariantParams {
            l: cfg.pick(a.l, "l", 10)?,
            l0: cfg.pick(a.l0, "l0", 0)?,
            lambda: cfg.pick(a.lambda, "lambda", 5.0)?,
        }),
        "direct" => ForecastMode::Direct(p),
        "iterated" => experiment::forecast_mode(p, p.l_pr, true),
        other => return Err(usage(format!("unknown mode {other:?}; expected simple, direct or iterated"))),
    };
    let shift = parse_shift(&cfg.pick(a.shift.clone(), "shift", "auto".to_string())?)?;
    let start = cfg.pick(a.start, "start", mode.first_target())?.max(mode.horizon());
    if start >= s.len() {
        bail!(stringfx::Error::Bounds { needed: start + 1, available: s.len() });
    }
    let targets: Vec<usize> = (start..s.len()).collect();
    let run = run_forecasts(&s, &targets, &mode, shift)?;
    let (path, file) = io.create(a.output.as_ref(), "forecasts.csv")?;
    run.write_csv(file)?;
    let report = ErrorReport::compute(&run.actuals(), &run.forecasts())?;
    let smape = metrics::smape(&run.actuals(), &run.forecasts()).ok();
    Ok(json!({
        "mode": mode_name,
        "params": mode,
        "shift": run.shift,
        "targets": run.rows.len(),
        "invalid": run.invalid_count(),
        "mae": report.mae,
        "smape": smape,
        "directional_hit_rate": directional_hit_rate(&s, &run, mode.horizon()),
        "output": path_str(&path),
    }))
}

#[derive(Args, Debug)]
pub struct PmbcsArgs {
    /// Tick file (timestamp_ms,bid,ask).
    #[arg(long, conflicts_with = "synthetic")]
    pub ticks: Option<PathBuf>,
    /// Generate a seeded random walk with this many ticks instead.
    #[arg(long)]
    pub synthetic: Option<usize>,
    /// Grid file of trading parameters; flags set the non-grid values.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long)]
    pub ls: Option<usize>,
    #[arg(long)]
    pub m: Option<u32>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub phi: Option<f64>,
    #[arg(long)]
    pub bins: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub d_threshold: Option<f64>,
    #[arg(long)]
    pub rho_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub skew_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub sharpe_min: Option<f64>,
    #[arg(long)]
    pub max_positions: Option<usize>,
    #[arg(long)]
    pub hourly_cap: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub min_occupancy: Option<u64>,
    #[arg(long)]
    pub template: Option<String>,
    #[arg(long)]
    pub learn_len: Option<usize>,
    #[arg(long)]
    pub trade_len: Option<usize>,
    #[arg(long)]
    pub leverage: Option<f64>,
    #[arg(long)]
    pub commission: Option<f64>,
    /// Signals CSV path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn pmbcs_params(cfg: &Settings, a: &PmbcsArgs) -> Result<PmbcsParams> {
    let d = PmbcsParams::default();
    let template = match cfg.lookup(a.template.clone(), "template")? {
        Some(t) => Template::parse(&t)?,
        None => d.template,
    };
    Ok(PmbcsParams {
        ls: cfg.pick(a.ls, "ls", d.ls)?,
        m: cfg.pick(a.m, "m", d.m)?,
        q: cfg.pick(a.q, "q", d.q)?,
        phi: cfg.pick(a.phi, "phi", d.phi)?,
        bins: cfg.pick(a.bins, "bins", d.bins)?,
        d_threshold: cfg.pick(a.d_threshold, "d_threshold", d.d_threshold)?,
        rho_min: cfg.pick(a.rho_min, "rho_min", d.rho_min)?,
        skew_min: cfg.pick(a.skew_min, "skew_min", d.skew_min)?,
        sharpe_min: cfg.pick(a.sharpe_min, "sharpe_min", d.sharpe_min)?,
        max_positions: cfg.pick(a.max_positions, "max_positions", d.max_positions)?,
        hourly_cap: cfg.pick(a.hourly_cap, "hourly_cap", d.hourly_cap)?,
        horizon: cfg.pick(a.horizon, "horizon", d.horizon)?,
        min_occupancy: cfg.pick(a.min_occupancy, "min_occupancy", d.min_occupancy)?,
        template,
    })
}

fn pmbcs(io: &Io, cfg: &Settings, a: &PmbcsArgs) -> Result<Value> {
    let ticks = match (&a.ticks, a.synthetic) {
        (Some(p), _) => io.ticks(p)?,
        (None, Some(n)) => {
            let t = gen_random_walk_ticks(n, 1.3, 2e-4, 2e-5, 1_000, io.global.seed);
            let (_, f) = io.create(None, "ticks.csv")?;
            t.write_csv(f)?;
            t
        }
        (None, None) => return Err(usage("pmbcs needs --ticks or --synthetic")),
    };
    let base = pmbcs_params(cfg, a)?;
    base.validate()?;
    let grid = match &a.grid {
        Some(path) => ParameterGrid::parse(&io.read(path)?)?
            .points()
            .iter()
            .map(|pt| pmbcs_from_point(pt, base))
            .collect::<stringfx::Result<Vec<_>>>()?,
        None => vec![base],
    };
    let d = Schedule::default();
    let schedule = Schedule {
        learn_len: cfg.pick(a.learn_len, "learn_len", d.learn_len)?,
        trade_len: cfg.pick(a.trade_len, "trade_len", d.trade_len)?,
    };
    let bt = BacktestConfig {
        leverage: cfg.pick(a.leverage, "leverage", 1.0)?,
        commission: cfg.pick(a.commission, "commission", 0.0)?,
        ..Default::default()
    };
    let out = self_educate(&ticks, &grid, schedule, &bt, io.global.workers)?;
    let (signals_path, file) = io.create(a.output.as_ref(), "signals.csv")?;
    write_signals_csv(&out.signals, file)?;
    let trades = write_report(io, &out.report)?;
    let windows: Vec<Value> = out
        .windows
        .iter()
        .map(|w| json!({ "learn_start": w.learn_start, "trade_start": w.trade_start, "trade_end": w.trade_end, "grid_index": w.grid_index, "params": w.params, "selection_sharpe": w.score.sharpe, "selection_profit_pct": w.score.profit_pct }))
        .collect();
    Ok(json!({
        "ticks": ticks.len(),
        "grid_points": grid.len(),
        "windows": windows,
        "signals": out.signals.iter().filter(|s| s.direction.is_some()).count(),
        "backtest": report_json(&out.report),
        "outputs": { "signals": path_str(&signals_path), "trades": trades[0], "equity_by_trade": trades[1], "equity_by_day": trades[2] },
    }))
}

fn report_json(r: &stringfx::BacktestReport) -> Value {
    json!({
        "trades": r.trade_count,
        "final_equity": r.final_equity,
        "final_profit_pct": r.final_profit_pct,
        "max_drawdown_pct": r.max_drawdown_pct,
        "sharpe": r.sharpe,
        "peak_open_positions": r.peak_open_positions,
        "total_commission": r.total_commission(),
    })
}

fn write_report(io: &Io, r: &stringfx::BacktestReport) -> Result<[String; 3]> {
    let (a, f) = io.create(None, "trades.csv")?;
    r.write_trades_csv(f)?;
    let (b, f) = io.create(None, "equity_by_trade.csv")?;
    r.write_equity_by_trade_csv(f)?;
    let (c, f) = io.create(None, "equity_by_day.csv")?;
    r.write_equity_by_day_csv(f)?;
    Ok([path_str(&a), path_str(&b), path_str(&c)])
}

#[derive(Args, Debug)]
pub struct BacktestArgs {
    #[arg(long)]
    pub ticks: PathBuf,
    /// CSV with `index` and `direction` columns (long, short or none).
    #[arg(long)]
    pub signals: PathBuf,
    #[arg(long)]
    pub initial_equity: Option<f64>,
    #[arg(long)]
    pub leverage: Option<f64>,
    #[arg(long)]
    pub position_fraction: Option<f64>,
    #[arg(long)]
    pub max_positions: Option<usize>,
    #[arg(long)]
    pub hourly_cap: Option<usize>,
    #[arg(long)]
    pub horizon: Option<usize>,
    #[arg(long)]
    pub commission: Option<f64>,
    #[arg(long)]
    pub close_on_opposite: Option<bool>,
    #[arg(long)]
    pub stop_on_ruin: Option<bool>,
    #[arg(long, allow_negative_numbers = true)]
    pub benchmark_return: Option<f64>,
}

fn parse_signals(text: &str) -> Result<Vec<OrderSignal>> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| stringfx::Error::Parse { line: 1, message: e.to_string() })?.clone();
    let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h));
    let (Some(ix), Some(dx)) = (col(&["index"]), col(&["direction", "dir"])) else {
        bail!(stringfx::Error::Parse { line: 1, message: "signals need index and direction columns".into() });
    };
    let mut out = Vec::new();
    for (n, rec) in reader.records().enumerate() {
        let line = n + 2;
        let rec = rec.map_err(|e| stringfx::Error::Parse { line, message: e.to_string() })?;
        let index: usize = rec[ix]
            .parse()
            .map_err(|_| stringfx::Error::Parse { line, message: format!("bad index {:?}", &rec[ix]) })?;
        let direction = match rec[dx].to_ascii_lowercase().as_str() {
            "long" | "buy" => Direction::Long,
            "short" | "sell" => Direction::Short,
            "none" | "" => continue,
            other => bail!(stringfx::Error::Parse { line, message: format!("bad direction {other:?}") }),
        };
        out.push(OrderSignal { index, direction });
    }
    Ok(out)
}

fn backtest(io: &Io, cfg: &Settings, a: &BacktestArgs) -> Result<Value> {
    let ticks = io.ticks(&a.ticks)?;
    let signals = parse_signals(&io.read(&a.signals)?)?;
    let d = BacktestConfig::default();
    let bt = BacktestConfig {
        initial_equity: cfg.pick(a.initial_equity, "initial_equity", d.initial_equity)?,
        leverage: cfg.pick(a.leverage, "leverage", d.leverage)?,
        position_fraction: cfg.pick(a.position_fraction, "position_fraction", d.position_fraction)?,
        max_positions: cfg.pick(a.max_positions, "max_positions", d.max_positions)?,
        hourly_cap: cfg.pick(a.hourly_cap, "hourly_cap", d.hourly_cap)?,
        commission: cfg.pick(a.commission, "commission", d.commission)?,
        horizon: cfg.pick(a.horizon, "horizon", d.horizon)?,
        close_on_opposite: cfg.pick(a.close_on_opposite, "close_on_opposite", d.close_on_opposite)?,
        stop_on_ruin: cfg.pick(a.stop_on_ruin, "stop_on_ruin", d.stop_on_ruin)?,
        benchmark_return: cfg.pick(a.benchmark_return, "benchmark_return", d.benchmark_return)?,
    };
    let report = run_backtest(&ticks, &signals, &bt)?;
    let paths = write_report(io, &report)?;
    Ok(json!({
        "ticks": ticks.len(),
        "signals": signals.len(),
        "config": bt,
        "report": report_json(&report),
        "outputs": { "trades": paths[0], "equity_by_trade": paths[1], "equity_by_day": paths[2] },
    }))
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// In-sample MAE of direct forecasts.
    Mae,
    /// In-sample MAE of chained one-step forecasts.
    IteratedMae,
    /// MAE, plus profit, drawdown and Sharpe of trading on forecasts.
    Trading,
}

#[derive(Args, Debug)]
pub struct OptimizeArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Grid file: one `name = v1, v2, ...` line per axis.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub objective: Option<Objective>,
    #[arg(long)]
    pub l_pr: Option<usize>,
    /// Leading fraction of the series used for selection.
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Drawdown ceiling in percent (trading objective only).
    #[arg(long)]
    pub max_drawdown: Option<f64>,
    #[arg(long)]
    pub leverage: Option<f64>,
    #[arg(long)]
    pub surface_x: Option<String>,
    #[arg(long)]
    pub surface_y: Option<String>,
    /// Hold an axis at a value in the surface, as name=value.
    #[arg(long)]
    pub fix: Vec<String>,
    /// Ranked results CSV path.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub surface_output: Option<PathBuf>,
}

fn optimize(io: &Io, cfg: &Settings, a: &OptimizeArgs) -> Result<Value> {
    let s = io.prices(&a.input)?;
    let grid = match &a.grid {
        Some(p) => ParameterGrid::parse(&io.read(p)?)?,
        None => ParameterGrid::default_pmbsi(),
    };
    let objective = match cfg.lookup(None::<String>, "objective")? {
        _ if a.objective.is_some() => a.objective.unwrap(),
        Some(name) => Objective::from_str(&name, true).map_err(|e| usage(format!("objective: {e}")))?,
        None => Objective::Mae,
    };
    let l_pr = cfg.pick(a.l_pr, "l_pr", 1)?;
    let train_frac = cfg.pick(a.train_frac, "train_frac", 0.5)?;
    if !(0.0..=1.0).contains(&train_frac) {
        return Err(usage(format!("train_frac must be in [0, 1], got {train_frac}")));
    }
    let n_train = train_len(s.len(), train_frac);
    let max_dd = cfg.lookup(a.max_drawdown, "max_drawdown")?;
    let shift = ShiftRule::Auto;
    let bt = BacktestConfig { leverage: cfg.pick(a.leverage, "leverage", 1.0)?, ..Default::default() };
    let workers = io.global.workers;
    let (outcome, rule) = match objective {
        Objective::Mae | Objective::IteratedMae => {
            if max_dd.is_some() {
                return Err(usage("--max-drawdown needs the trading objective"));
            }
            let iterated = objective == Objective::IteratedMae;
            (grid_search(&grid, mae_objective(&s, n_train, l_pr, iterated, shift), Sense::Minimize, &[], workers)?, SelectionRule::EvalMae)
        }
        Objective::Trading => {
            let constraints: Vec<Constraint> = max_dd.map(|m| Constraint::at_most("max_drawdown_pct", m)).into_iter().collect();
            (
                grid_search(&grid, trading_objective(&s, n_train, l_pr, shift, &bt), Sense::Minimize, &constraints, workers)?,
                SelectionRule::SharpeThenProfit,
            )
        }
    };
    let (results_path, file) = io.create(a.output.as_ref(), "optimize_results.csv")?;
    write_results_csv(&outcome, file)?;

    let names = grid.names();
    let default_axis = |i: usize| names.get(i).cloned();
    let x = cfg.lookup(a.surface_x.clone(), "surface_x")?.or_else(|| default_axis(0));
    let y = cfg.lookup(a.surface_y.clone(), "surface_y")?.or_else(|| default_axis(1));
    let mut fixed = BTreeMap::new();
    for f in &a.fix {
        let (k, v) = f.split_once('=').ok_or_else(|| usage(format!("--fix expects name=value, got {f:?}")))?;
        let v: f64 = v.trim().parse().map_err(|_| usage(format!("--fix value {v:?} is not a number")))?;
        fixed.insert(k.trim().to_string(), v);
    }
    let surface = match (x, y) {
        (Some(x), Some(y)) => {
            let surf = error_surface(&outcome, &x, &y, &fixed)?;
            let (p, f) = io.create(a.surface_output.as_ref(), "surface.csv")?;
            surf.write_csv(f)?;
            json!({ "x": x, "y": y, "fixed": fixed, "best": surf.best(Sense::Minimize), "output": path_str(&p) })
        }
        _ => Value::Null,
    };

    let best = select_best(&outcome.results, rule, true)?;
    let base = PmbsiParams { l_pr: if objective == Objective::IteratedMae { 1 } else { l_pr }, ..Default::default() };
    Ok(json!({
        "objective": format!("{objective:?}"),
        "l_pr": l_pr,
        "grid_size": grid.size(),
        "evaluations": outcome.evaluations,
        "failed": outcome.results.iter().filter(|r| r.is_failed()).count(),
        "violating": outcome.results.iter().filter(|r| r.violates).count(),
        "best": { "params": pmbsi_from_point(&best.params, base)?, "objective": best.objective, "metrics": best.aux },
        "surface": surface,
        "output": path_str(&results_path),
    }))
}

#[derive(Args, Debug)]
pub struct MetricsArgs {
    /// Actual series (index,price).
    #[arg(long, requires = "forecast", conflicts_with = "forecasts")]
    pub actual: Option<PathBuf>,
    /// Forecast series (index,price), aligned with the actual series.
    #[arg(long)]
    pub forecast: Option<PathBuf>,
    /// Forecast output CSV with `actual` and `forecast` columns.
    #[arg(long)]
    pub forecasts: Option<PathBuf>,
}

fn metrics_cmd(io: &Io, a: &MetricsArgs) -> Result<Value> {
    let (actual, forecast) = match (&a.actual, &a.forecast, &a.forecasts) {
        (Some(ap), Some(fp), None) => {
            let (act, fc) = (parse_series(&io.read(ap)?)?, parse_series(&io.read(fp)?)?);
            if act.len() != fc.len() || act.origin_index != fc.origin_index {
                bail!(stringfx::Error::Alignment { index: fc.origin_index, len: act.len() });
            }
            (act.values, fc.values)
        }
        (None, None, Some(p)) => {
            let text = io.read(p)?;
            let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
            let headers = reader.headers().map_err(|e| stringfx::Error::Parse { line: 1, message: e.to_string() })?.clone();
            let col = |n: &str| headers.iter().position(|h| h == n);
            let (Some(ai), Some(fi)) = (col("actual"), col("forecast")) else {
                bail!(stringfx::Error::Parse { line: 1, message: "expected actual and forecast columns".into() });
            };
            let (mut act, mut fc) = (Vec::new(), Vec::new());
            for (n, rec) in reader.records().enumerate() {
                let line = n + 2;
                let rec = rec.map_err(|e| stringfx::Error::Parse { line, message: e.to_string() })?;
                let num = |i: usize| rec[i].parse::<f64>().map_err(|_| stringfx::Error::Parse { line, message: format!("bad number {:?}", &rec[i]) });
                act.push(num(ai)?);
                fc.push(num(fi)?);
            }
            (act, fc)
        }
        _ => return Err(usage("metrics needs --actual with --forecast, or --forecasts")),
    };
    let report = ErrorReport::compute(&actual, &forecast)?;
    Ok(json!({ "n": report.n, "mae": report.mae, "smape": report.smape }))
}

#[derive(Args, Debug)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Grid file overriding the built-in sinusoid grid.
    #[arg(long)]
    pub grid: Option<PathBuf>,
    /// Table output path.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

fn reproduce(io: &Io, cfg: &Settings, a: &ReproduceArgs) -> Result<Value> {
    let d = SinusoidConfig::default();
    let sc = SinusoidConfig {
        n: cfg.pick(a.n, "n", d.n)?,
        train_frac: cfg.pick(a.train_frac, "train_frac", d.train_frac)?,
        grid: match &a.grid {
            Some(p) => ParameterGrid::parse(&io.read(p)?)?,
            None => d.grid.clone(),
        },
        workers: io.global.workers,
        ..d
    };
    let report = reproduce_sinusoid(&sc)?;
    let table = report.render_table();
    print!("{table}");
    let path = io.output(a.output.as_ref(), "sinusoid_table.txt")?;
    fs::write(&path, &table).with_context(|| format!("writing {}", path.display()))?;
    Ok(json!({ "report": report, "output": path_str(&path) }))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn signals_csv_accepts_both_layouts() {
        let a = parse_signals("index,direction\n3,long\n5,short\n").unwrap();
        assert_eq!(a, vec![OrderSignal { index: 3, direction: Direction::Long }, OrderSignal { index: 5, direction: Direction::Short }]);
        let b = parse_signals("index,M,direction,bin,dkl\n1,0.2,none,3,0.1\n2,0.3,short,4,0.2\n").unwrap();
        assert_eq!(b, vec![OrderSignal { index: 2, direction: Direction::Short }]);
        assert!(parse_signals("index,direction\n1,up\n").is_err());
        assert!(parse_signals("i,d\n1,long\n").is_err());
    }

    #[test]
    fn shift_parsing() {
        assert_eq!(parse_shift("auto").unwrap(), ShiftRule::Auto);
        assert_eq!(parse_shift("2.5").unwrap(), ShiftRule::Constant(2.5));
        assert!(parse_shift("lots").is_err());
    }
}
