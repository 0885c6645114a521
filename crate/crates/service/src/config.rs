//! Service configuration file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use firecover_core::criteria::CriteriaOptions;
use firecover_core::forecast::ForecastConfig;
use firecover_core::geo::GridSpec;
use firecover_core::mobility::{TravelParams, DEFAULT_K_MINUTES};
use firecover_core::model::YearMonth;
use firecover_core::optimizer::GaConfig;
use firecover_core::simulate::Bucketing;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Input files. Relative paths resolve against the config file's directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct DataPaths {
    pub fires: PathBuf,
    pub stations: PathBuf,
    pub features: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct WindowConfig {
    pub start: YearMonth,
    pub end: YearMonth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct Defaults {
    pub k_minutes: f64,
    pub include_existing: bool,
    pub bucketing: Bucketing,
    pub transfer_backup: bool,
    pub tod_width_hours: u32,
    pub ga: GaConfig,
}

impl Default for Defaults {
    fn default() -> Self {
        Defaults {
            k_minutes: DEFAULT_K_MINUTES,
            include_existing: true,
            bucketing: Bucketing::Quarter,
            transfer_backup: false,
            tod_width_hours: firecover_core::analytics::DEFAULT_TOD_WIDTH_HOURS,
            ga: GaConfig::default(),
        }
    }
}

impl Defaults {
    pub fn criteria_options(&self) -> CriteriaOptions {
        CriteriaOptions { k_minutes: self.k_minutes, include_existing: self.include_existing }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct ServerConfig {
    pub bind: String,
    /// Jobs allowed to compute at the same time; the rest wait queued.
    pub max_concurrent_jobs: usize,
}

impl Default for ServerConfig {
    fn default() -> Self {
        ServerConfig { bind: "127.0.0.1:8080".into(), max_concurrent_jobs: 2 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Config {
    pub data: DataPaths,
    pub grid: GridSpec,
    /// Defaults to the months spanned by the fire records.
    #[serde(default)]
    pub window: Option<WindowConfig>,
    #[serde(default)]
    pub travel: TravelParams,
    #[serde(default)]
    pub forecast: ForecastConfig,
    #[serde(default)]
    pub defaults: Defaults,
    #[serde(default)]
    pub server: ServerConfig,
}

impl Config {
    /// Reads a config file and makes its data paths absolute.
    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut cfg: Config =
            serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.data.fires = base.join(&cfg.data.fires);
        cfg.data.stations = base.join(&cfg.data.stations);
        cfg.data.features = cfg.data.features.map(|f| base.join(f));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> anyhow::Result<()> {
        self.grid.validate()?;
        self.travel.validate()?;
        self.forecast.validate()?;
        self.defaults.ga.validate()?;
        anyhow::ensure!(
            self.defaults.k_minutes.is_finite() && self.defaults.k_minutes > 0.0,
            "defaults.k_minutes must be positive"
        );
        anyhow::ensure!(self.server.max_concurrent_jobs >= 1, "server.max_concurrent_jobs must be at least 1");
        Ok(())
    }
}
