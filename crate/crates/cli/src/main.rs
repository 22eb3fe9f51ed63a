//! `lobfit` command-line front end.
//!
//! Settings resolve in layers: built-in defaults, then `--config FILE`,
//! then `--set key=value`, then named flags. Every JSON report embeds the
//! resolved settings.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lobfit::report::RunConfig;
use lobfit::LobError;

#[derive(Parser, Debug)]
#[command(name = "lobfit", version, about = "Zero-intelligence order book models: simulation and estimation")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Common {
    /// Plain-text `key = value` settings file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Extra setting, overriding the config file.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Also print a plain-text summary table.
    #[arg(long, global = true)]
    table: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate a book and write quotes.csv, trades.csv and manifest.json.
    Simulate(commands::SimulateArgs),
    /// Fit one model variant.
    Estimate(commands::EstimateArgs),
    /// Run the S, T1, T2, T3 selection ladder.
    Select(commands::EstimateArgs),
    /// Out-of-sample prediction power of a fitted model.
    Predict(commands::PredictArgs),
    /// Match trades to quote changes.
    Match(commands::MatchArgs),
    /// Wilcoxon signed-rank comparison of paired prediction reports.
    Compare(commands::CompareArgs),
}

/// Exit codes: 0 success, 2 insufficient data, 3 timeout, 4 input error.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<LobError>() {
            return match e {
                LobError::InsufficientData(_) => 2,
                LobError::Timeout => 3,
                LobError::Input(_)
                | LobError::InvalidGrid(_)
                | LobError::InvalidParams(_)
                | LobError::InvalidIntensity(_)
                | LobError::InvalidBook(_) => 4,
                _ => 1,
            };
        }
        if cause.is::<std::io::Error>() || cause.is::<serde_json::Error>() {
            return 4;
        }
    }
    1
}

fn base_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::new(),
    };
    for kv in &common.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| LobError::Input(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        cfg.set(k.trim(), v.trim());
    }
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(t) = cli.common.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let cfg = base_config(&cli.common)?;
    let table = cli.common.table;
    match cli.command {
        Command::Simulate(a) => commands::simulate(cfg, &a, table),
        Command::Estimate(a) => commands::estimate(cfg, &a, table),
        Command::Select(a) => commands::select(cfg, &a, table),
        Command::Predict(a) => commands::predict(cfg, &a, table),
        Command::Match(a) => commands::match_cmd(cfg, &a, table),
        Command::Compare(a) => commands::compare(cfg, &a, table),
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 4 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
