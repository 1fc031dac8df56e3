use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

mod commands;
mod config;

/// Misuse of the command line or configuration (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_NUMERIC: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "stringfx", version, about = "String-map forecasting, momentum trading and backtesting on price series")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct GlobalArgs {
    /// key = value configuration file; sections are named after subcommands.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Summary JSON path; defaults to <out-dir>/summary.json.
    #[arg(long, global = true)]
    pub summary: Option<PathBuf>,
    /// Base directory for relative input paths.
    #[arg(long, global = true, env = "STRINGFX_DATA_DIR")]
    pub data_dir: Option<PathBuf>,
    /// Worker threads for grid evaluation; defaults to available parallelism.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Seed for generated fixtures.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Apply a string map or transform to a price series.
    Transform(commands::TransformArgs),
    /// Forecast a series with the invariant predictors.
    Forecast(commands::ForecastArgs),
    /// Learn and trade closed-string momentum signals on tick data.
    Pmbcs(commands::PmbcsArgs),
    /// Backtest a signal stream on tick data.
    Backtest(commands::BacktestArgs),
    /// Grid search over forecasting parameters.
    Optimize(commands::OptimizeArgs),
    /// Error metrics of forecasts against actual values.
    Metrics(commands::MetricsArgs),
    /// Run the sinusoid forecasting study and print the comparison table.
    ReproduceSinusoid(commands::ReproduceArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
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

fn exit_code(err: &anyhow::Error) -> u8 {
    if let Some(e) = err.downcast_ref::<stringfx::Error>() {
        return match e.kind() {
            stringfx::ErrorKind::Usage => EXIT_USAGE,
            stringfx::ErrorKind::Data => EXIT_DATA,
            stringfx::ErrorKind::Numeric => EXIT_NUMERIC,
        };
    }
    // missing or unreadable files are reported as usage errors
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = cli.command.name();
    let summary_path = cli.global.summary.clone().unwrap_or_else(|| cli.global.out_dir.join("summary.json"));
    let (code, summary) = match commands::run(&cli) {
        Ok(results) => (0u8, json!({ "command": name, "version": env!("CARGO_PKG_VERSION"), "status": "ok", "exit_code": 0, "results": results })),
        Err(err) => {
            let code = exit_code(&err);
            eprintln!("error: {err:#}");
            (code, json!({ "command": name, "version": env!("CARGO_PKG_VERSION"), "status": "error", "exit_code": code, "error": format!("{err:#}") }))
        }
    };
    if let Err(e) = write_summary(&summary_path, &summary) {
        eprintln!("error: writing summary {}: {e:#}", summary_path.display());
        return ExitCode::from(if code == 0 { EXIT_USAGE } else { code });
    }
    ExitCode::from(code)
}

fn write_summary(path: &std::path::Path, summary: &Value) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, serde_json::to_string_pretty(summary)? + "\n")?;
    Ok(())
}
