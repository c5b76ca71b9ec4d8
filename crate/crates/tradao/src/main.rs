use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use chrono::NaiveDate;
use clap::{Parser, Subcommand};
use serde::Serialize;
use tradao::service::{RunRequest, Service};
use tradao::{api, demo, ServiceError};
use tradao_core::backtest::{BacktestRecord, ExecutionConfig};
use tradao_core::models::ModelParams;
use tradao_core::time::Period;

/// Iterative trading-algorithm tuning workbench.
#[derive(Parser)]
#[command(version)]
struct Cli {
    /// Data directory holding market data, records and evolution trees.
    #[arg(long, global = true, env = "TRADAO_DATA", default_value = "data")]
    data: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an OHLCV CSV file for a symbol, replacing any existing series.
    IngestMarket {
        csv: PathBuf,
        #[arg(long)]
        symbol: String,
    },
    /// Backtest a parameter set (JSON file) and register it in its evolution tree.
    Run {
        #[arg(long)]
        params: PathBuf,
        #[arg(long)]
        from: NaiveDate,
        #[arg(long)]
        to: NaiveDate,
        #[arg(long)]
        parent: Option<String>,
        #[arg(long)]
        id: Option<String>,
        #[arg(long)]
        label: Option<String>,
        #[arg(long, default_value_t = ExecutionConfig::default().initial_capital)]
        capital: f64,
        #[arg(long, default_value_t = 0.0)]
        commission: f64,
    },
    /// Register an externally produced backtest record (JSON).
    IngestRecord {
        record: PathBuf,
        #[arg(long)]
        parent: Option<String>,
    },
    /// Print an instance with its metrics and normalized category scores.
    Metrics { instance: String },
    /// Print the evolution tree of a strategy, or list strategies when omitted.
    Tree { strategy: Option<String> },
    /// Serve the REST API.
    Serve {
        #[arg(long, default_value = "127.0.0.1")]
        host: std::net::IpAddr,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Directory of static files served next to the API.
        #[arg(long = "static")]
        static_dir: Option<PathBuf>,
    },
    /// Seed the data directory with a synthetic index pair and a small tree.
    Demo {
        #[arg(long, default_value_t = demo::DEMO_SEED)]
        seed: u64,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("{0}: {1}")]
    Json(PathBuf, serde_json::Error),
    #[error("{} ({})", .0, .0.code())]
    Service(#[from] ServiceError),
    #[error("server: {0}")]
    Server(std::io::Error),
}

fn read(path: &PathBuf) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::Io(path.clone(), e))
}

fn read_json<T: serde::de::DeserializeOwned>(path: &PathBuf) -> Result<T, CliError> {
    serde_json::from_slice(&read(path)?).map_err(|e| CliError::Json(path.clone(), e))
}

fn print<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("output serializes"));
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let service = Service::open(&cli.data)?;
    match cli.command {
        Command::IngestMarket { csv, symbol } => {
            let (summary, replaced) = service.ingest_market_csv(&symbol, &read(&csv)?)?;
            eprintln!("{} {symbol}", if replaced { "replaced" } else { "added" });
            print(&summary);
        }
        Command::Run { params, from, to, parent, id, label, capital, commission } => {
            let params: ModelParams = read_json(&params)?;
            let response = service.run_and_register(RunRequest {
                id,
                strategy_id: None,
                parent_id: parent,
                label,
                params,
                period: Period::new(from, to),
                config: ExecutionConfig { initial_capital: capital, commission_per_unit: commission },
            })?;
            print(&response);
        }
        Command::IngestRecord { record, parent } => {
            let record: BacktestRecord = read_json(&record)?;
            let (response, created) = service.ingest_record(record, parent.as_deref())?;
            if !created {
                eprintln!("already registered");
            }
            print(&response);
        }
        Command::Metrics { instance } => print(&service.instance(&instance)?),
        Command::Tree { strategy: Some(s) } => print(&service.tree(&s)?),
        Command::Tree { strategy: None } => print(&service.strategies()),
        Command::Serve { host, port, static_dir } => {
            let service = Arc::new(service);
            let app = match static_dir {
                Some(dir) => api::router_with_static(service, dir),
                None => api::router(service),
            };
            let addr = SocketAddr::new(host, port);
            let rt = tokio::runtime::Runtime::new().map_err(CliError::Server)?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                eprintln!("listening on http://{addr}");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })
            .map_err(CliError::Server)?;
        }
        Command::Demo { seed } => {
            let tree = demo::seed(&service, seed)?;
            for (role, r) in [("parent", &tree.parent), ("sibling", &tree.sibling), ("child", &tree.child)] {
                println!("{role:8} {} {}", r.instance.label, r.instance.id);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
