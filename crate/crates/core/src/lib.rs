//! String-map transforms of price series, invariant-based forecasting,
//! closed-string momentum trading, backtesting and grid search.

// NaN must fail validation, hence negated comparisons
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod error;
pub mod experiment;
pub mod marketdata;
pub mod metrics;
pub mod optimize;
pub mod pmbcs;
pub mod pmbsi;
pub mod stringmap;

pub use backtest::{run_backtest, BacktestConfig, BacktestReport, Direction, OrderSignal, Trade};
pub use error::{Error, ErrorKind, Result};
pub use marketdata::{PriceSeries, TickQuote, TickSeries};
pub use metrics::{ErrorReport, Histogram};
pub use optimize::{GridPoint, GridResult, ParameterGrid};
pub use pmbcs::{MomentumStats, PmbcsParams, Signal};
pub use pmbsi::{Forecast, PmbsiParams, SimpleInvariantParams};
pub use stringmap::StringWindowConfig;
