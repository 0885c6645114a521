//! Command-line entry point.
//!
//! Every command prints pretty JSON to stdout or writes it to `--out`.
//! Failures print `{"error": {"kind", "message"}}` on stderr and exit 1, or
//! 2 for usage errors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use firecover_core::ingest::{write_features, write_fire_records, write_stations, write_tensor};
use firecover_core::simulate::Bucketing;
use firecover_core::synthetic::{synthetic_city, SyntheticSpec};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tracing::info;

use crate::api::{router, AppState};
use crate::config::{Config, DataPaths, Defaults, ServerConfig, WindowConfig};
use crate::dataset::Dataset;
use crate::error::{ErrorBody, ErrorDetail, ServiceError};
use crate::ops::{self, EvaluateRequest, OptimizeRequest, SimulateRequest, SolutionInput};
use crate::schema;

#[derive(Debug, Parser)]
#[command(name = "firecover", version, about = "Fire station coverage analysis and placement")]
pub struct Cli {
    /// Service config file (JSON).
    #[arg(long, short, global = true, default_value = "config.json")]
    pub config: PathBuf,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic dataset and a config pointing at it
    Synth {
        /// Directory to write into
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 48)]
        months: usize,
    },
    /// Load inputs, write the rasterized tensor and print the load report
    Ingest {
        /// Where to write the tensor file
        #[arg(long)]
        tensor: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Yearly counts, response distributions and station table
    Stats {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Fitted forecaster and the full attribution export
    Forecast {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// GeoJSON boundary of the area reachable within k minutes
    Reach {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cells outside the k-minute reach, ranked by fire count
    Underserved {
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Response profile of one station
    Profile {
        #[arg(long)]
        station: String,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long)]
        tod_width: Option<u32>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the placement optimizer
    Optimize {
        /// Optimize request (JSON)
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score one candidate placement
    Evaluate {
        #[arg(long)]
        request: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Replay history with candidate placements added
    Simulate {
        /// A simulate request, an optimizer result, a list of solutions or
        /// a single solution (JSON)
        #[arg(long, alias = "solution")]
        solutions: PathBuf,
        #[arg(long)]
        bucketing: Option<Bucketing>,
        #[arg(long)]
        transfer_backup: Option<bool>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print a JSON schema by name, or the list of names
    Schema {
        name: Option<String>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Serve the HTTP API
    Serve {
        #[arg(long)]
        bind: Option<String>,
    },
}

pub fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            report("usage", &e.to_string());
            return ExitCode::from(2);
        }
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_ansi(std::io::IsTerminal::is_terminal(&std::io::stderr()))
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn,firecover=info".into()),
        )
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let kind = e.downcast_ref::<ServiceError>().map(ServiceError::kind).unwrap_or("runtime");
            report(kind, &format!("{e:#}"));
            ExitCode::FAILURE
        }
    }
}

fn report(kind: &str, message: &str) {
    let body = ErrorBody { error: ErrorDetail { kind: kind.to_string(), message: message.trim_end().to_string() } };
    eprintln!("{}", serde_json::to_string(&body).expect("error body serializes"));
}

fn emit<T: Serialize>(value: &T, out: Option<&Path>) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            std::io::stdout().lock().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> anyhow::Result<T> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(BufReader::new(file)).with_context(|| format!("parsing {}", path.display()))
}

fn load(config: &Path) -> anyhow::Result<Dataset> {
    Dataset::load(Config::load(config)?)
}

/// Solution files accepted by `simulate`. An optimizer result parses as a
/// request since its solutions carry `id` and `genome`.
#[derive(Deserialize)]
#[serde(untagged)]
enum SolutionsFile {
    Request(SimulateRequest),
    List(Vec<SolutionInput>),
    Single(SolutionInput),
}

impl SolutionsFile {
    fn into_request(self) -> SimulateRequest {
        match self {
            SolutionsFile::Request(r) => r,
            SolutionsFile::List(solutions) => SimulateRequest { solutions, bucketing: None, transfer_backup: None },
            SolutionsFile::Single(s) => SimulateRequest { solutions: vec![s], bucketing: None, transfer_backup: None },
        }
    }
}

pub fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Synth { out, seed, months } => synth(&out, seed, months),
        Command::Ingest { tensor, out } => {
            let ds = load(&cli.config)?;
            if let Some(path) = tensor {
                let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
                write_tensor(&ds.tensor, BufWriter::new(file))?;
                info!(path = %path.display(), "wrote tensor");
            }
            emit(&ds.report, out.as_deref())
        }
        Command::Stats { k, out } => {
            let ds = load(&cli.config)?;
            let value = json!({
                "yearly": ops::yearly(&ds),
                "response_distribution": ops::distribution(&ds),
                "stations": ops::stations(&ds, k)?,
            });
            emit(&value, out.as_deref())
        }
        Command::Forecast { out } => {
            let ds = load(&cli.config)?;
            let (model, frame) = ds.forecast.as_ref().ok_or_else(|| {
                anyhow!("forecast unavailable: {}", ds.report.forecast_error.as_deref().unwrap_or("not fitted"))
            })?;
            emit(&json!({ "model": model, "attribution": frame.export() }), out.as_deref())
        }
        Command::Reach { k, out } => emit(&ops::reachability(&load(&cli.config)?, k)?, out.as_deref()),
        Command::Underserved { k, out } => emit(&ops::underserved_cells(&load(&cli.config)?, k)?, out.as_deref()),
        Command::Profile { station, k, tod_width, out } => {
            emit(&ops::profile(&load(&cli.config)?, &station, k, tod_width)?, out.as_deref())
        }
        Command::Optimize { request, seed, out } => {
            let ds = load(&cli.config)?;
            let mut req: OptimizeRequest = read_json(&request)?;
            if seed.is_some() {
                req.seed = seed;
            }
            let mut last = 0;
            let result = ops::optimize(&ds, &req, |done, total| {
                let pct = done * 10 / total.max(1);
                if pct > last {
                    last = pct;
                    info!(done, total, "optimizing");
                }
            })?;
            emit(&result, out.as_deref())
        }
        Command::Evaluate { request, out } => {
            let req: EvaluateRequest = read_json(&request)?;
            emit(&ops::evaluate(&load(&cli.config)?, &req)?, out.as_deref())
        }
        Command::Simulate { solutions, bucketing, transfer_backup, out } => {
            let ds = load(&cli.config)?;
            let mut req = read_json::<SolutionsFile>(&solutions)?.into_request();
            if bucketing.is_some() {
                req.bucketing = bucketing;
            }
            if transfer_backup.is_some() {
                req.transfer_backup = transfer_backup;
            }
            emit(&ops::simulate(&ds, &req, |_, _| {})?, out.as_deref())
        }
        Command::Schema { name, out } => match name {
            None => emit(&schema::NAMES, out.as_deref()),
            Some(n) => {
                let s = schema::by_name(&n).ok_or_else(|| ServiceError::NotFound(format!("schema {n:?}")))?;
                emit(&s, out.as_deref())
            }
        },
        Command::Serve { bind } => serve(&cli.config, bind),
    }
}

fn synth(dir: &Path, seed: u64, months: usize) -> anyhow::Result<()> {
    let spec = SyntheticSpec { seed, months, ..SyntheticSpec::default() };
    let city = synthetic_city(&spec)?;
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let create = |name: &str| -> anyhow::Result<BufWriter<File>> {
        let path = dir.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
    };
    write_fire_records(&city.fires, create("fires.csv")?)?;
    write_stations(&city.stations, create("stations.csv")?)?;
    write_features(&city.features, create("features.csv")?)?;
    let config = Config {
        data: DataPaths {
            fires: "fires.csv".into(),
            stations: "stations.csv".into(),
            features: Some("features.csv".into()),
        },
        grid: city.grid,
        window: Some(WindowConfig { start: city.window.start, end: city.window.end }),
        travel: spec.travel,
        forecast: Default::default(),
        defaults: Defaults::default(),
        server: ServerConfig::default(),
    };
    emit(&config, Some(&dir.join("config.json")))?;
    emit(
        &json!({
            "config": dir.join("config.json"),
            "fire_records": city.fires.len(),
            "stations": city.stations.len(),
            "window": city.window,
        }),
        None,
    )
}

fn serve(config: &Path, bind: Option<String>) -> anyhow::Result<()> {
    let ds = load(config)?;
    let bind = bind.unwrap_or_else(|| ds.config.server.bind.clone());
    if let Some(e) = &ds.report.forecast_error {
        tracing::warn!(error = %e, "forecast unavailable; forecast endpoints will return 503");
    }
    let state = Arc::new(AppState::new(ds));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&bind).await.with_context(|| format!("binding {bind}"))?;
        info!(addr = %listener.local_addr()?, "listening");
        axum::serve(listener, router(state)).await?;
        Ok(())
    })
}
