//! Per-cell monthly fire-count forecasting and feature attribution.
//!
//! Each cell gets its own ridge regression of next month's fire count on the
//! current month's five explanatory features and the last `T` monthly
//! counts. The [`Forecaster`] trait is the seam for alternative models;
//! attribution works against the trait and only takes the closed-form path
//! when a model exposes linear weights.
//!
//! Input vector layout for one cell at month `t`:
//! `[feature_0(t) .. feature_4(t), count(t-T+1) .. count(t)]`.

mod attribution;
mod shapley;

pub use attribution::{attribute, AttributionExport, AttributionFrame, CellAttribution, CitywidePoint};
pub use shapley::{shapley_exact, MAX_ENUMERATED_FEATURES};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geo::GridSpec;
use crate::model::{SpatioTemporalTensor, FEATURE_COUNT, FEATURE_NAMES, FIRE_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    LinearRidge,
    /// Externally supplied [`Forecaster`]; [`fit`] does not build these.
    Plugin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default)]
pub struct ForecastConfig {
    /// Months of lagged counts fed to the model (`T`).
    pub history_window: usize,
    /// Months predicted by recursive rollout (`K`).
    pub horizon: usize,
    pub model: ModelKind,
    pub ridge_lambda: f64,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        ForecastConfig { history_window: 3, horizon: 1, model: ModelKind::LinearRidge, ridge_lambda: 1.0 }
    }
}

impl ForecastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.history_window == 0 || self.horizon == 0 {
            return Err(Error::invalid("history_window and horizon must be at least 1"));
        }
        if !(self.ridge_lambda.is_finite() && self.ridge_lambda >= 0.0) {
            return Err(Error::invalid("ridge_lambda must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        FEATURE_COUNT + self.history_window
    }
}

/// A fitted one-step predictor over the per-cell input vector.
pub trait Forecaster: Send + Sync {
    fn grid(&self) -> &GridSpec;

    fn history_window(&self) -> usize;

    fn horizon(&self) -> usize;

    /// Unclamped one-step prediction for flat cell `cell`.
    fn predict_cell(&self, cell: usize, inputs: &[f64]) -> f64;

    /// Attribution baseline: training means of the input vector.
    fn baseline(&self, cell: usize) -> &[f64];

    /// `(weights, intercept)` when the cell model is linear in its inputs.
    fn linear_part(&self, _cell: usize) -> Option<(&[f64], f64)> {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CellModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub input_means: Vec<f64>,
}

impl CellModel {
    fn zero(len: usize) -> Self {
        CellModel { weights: vec![0.0; len], intercept: 0.0, input_means: vec![0.0; len] }
    }

    pub fn evaluate(&self, inputs: &[f64]) -> f64 {
        self.weights.iter().zip(inputs).map(|(w, x)| w * x).sum::<f64>() + self.intercept
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FittedForecaster {
    pub grid: GridSpec,
    pub config: ForecastConfig,
    /// Row-major, one per grid cell.
    pub cells: Vec<CellModel>,
}

impl Forecaster for FittedForecaster {
    fn grid(&self) -> &GridSpec {
        &self.grid
    }

    fn history_window(&self) -> usize {
        self.config.history_window
    }

    fn horizon(&self) -> usize {
        self.config.horizon
    }

    fn predict_cell(&self, cell: usize, inputs: &[f64]) -> f64 {
        self.cells[cell].evaluate(inputs)
    }

    fn baseline(&self, cell: usize) -> &[f64] {
        &self.cells[cell].input_means
    }

    fn linear_part(&self, cell: usize) -> Option<(&[f64], f64)> {
        let c = &self.cells[cell];
        Some((&c.weights, c.intercept))
    }
}

/// Channel indices of `fire_count` and the five features.
pub(crate) struct ChannelMap {
    pub count: usize,
    pub features: [usize; FEATURE_COUNT],
}

impl ChannelMap {
    pub fn of(tensor: &SpatioTemporalTensor) -> Result<Self> {
        let count = tensor.require_channel(FIRE_COUNT)?;
        let mut features = [0; FEATURE_COUNT];
        for (slot, name) in features.iter_mut().zip(FEATURE_NAMES) {
            *slot = tensor.require_channel(name)?;
        }
        Ok(ChannelMap { count, features })
    }

    /// Input vector of `cell` at month `t` (needs `t + 1 >= window`).
    pub fn inputs(&self, tensor: &SpatioTemporalTensor, t: usize, cell: usize, window: usize, out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.features.iter().map(|&c| tensor.plane(t, c)[cell]));
        out.extend((t + 1 - window..=t).map(|s| tensor.plane(s, self.count)[cell]));
    }
}

/// Fits one ridge model per cell on every `(inputs(t), count(t+1))` pair in
/// `tensor`. The intercept is not penalized. A cell whose target is zero
/// throughout gets zero weights and a zero intercept.
pub fn fit(tensor: &SpatioTemporalTensor, cfg: &ForecastConfig) -> Result<FittedForecaster> {
    cfg.validate()?;
    if cfg.model != ModelKind::LinearRidge {
        return Err(Error::invalid("fit builds the linear ridge model; plugin forecasters are supplied pre-fitted"));
    }
    let window = cfg.history_window;
    let needed = window + cfg.horizon;
    if tensor.len() <= needed {
        return Err(Error::InsufficientHistory { needed, available: tensor.len() });
    }
    let channels = ChannelMap::of(tensor)?;
    let samples: Vec<usize> = (window - 1..tensor.len() - 1).collect();

    let cells = (0..tensor.grid.len())
        .into_par_iter()
        .map(|cell| {
            let mut row = Vec::with_capacity(cfg.input_len());
            let mut xs = Vec::with_capacity(samples.len());
            let mut ys = Vec::with_capacity(samples.len());
            for &t in &samples {
                channels.inputs(tensor, t, cell, window, &mut row);
                xs.push(row.clone());
                ys.push(tensor.plane(t + 1, channels.count)[cell]);
            }
            fit_ridge(&xs, &ys, cfg.ridge_lambda)
        })
        .collect();

    Ok(FittedForecaster { grid: tensor.grid, config: *cfg, cells })
}

/// Centered ridge regression solved as the augmented least-squares problem
/// `[Xc; sqrt(lambda) I] w = [yc; 0]` with an SVD pseudo-inverse, which
/// yields the minimum-norm solution when `lambda = 0` and `Xc` is rank
/// deficient.
fn fit_ridge(xs: &[Vec<f64>], ys: &[f64], lambda: f64) -> CellModel {
    let p = xs.first().map_or(0, Vec::len);
    let n = xs.len();
    if ys.iter().all(|&y| y == 0.0) {
        let mut m = CellModel::zero(p);
        m.input_means = column_means(xs, p);
        return m;
    }
    let means = column_means(xs, p);
    let y_mean = ys.iter().sum::<f64>() / n as f64;

    let extra = if lambda > 0.0 { p } else { 0 };
    let mut a = DMatrix::<f64>::zeros(n + extra, p);
    let mut b = DVector::<f64>::zeros(n + extra);
    for (r, (x, &y)) in xs.iter().zip(ys).enumerate() {
        for c in 0..p {
            a[(r, c)] = x[c] - means[c];
        }
        b[r] = y - y_mean;
    }
    let root = lambda.sqrt();
    for c in 0..extra {
        a[(n + c, c)] = root;
    }

    let svd = a.svd(true, true);
    let max_sv = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let weights: Vec<f64> = if max_sv == 0.0 {
        vec![0.0; p]
    } else {
        let eps = max_sv * 1e-12 * (n + extra).max(p) as f64;
        match svd.solve(&b, eps) {
            Ok(w) => w.iter().copied().collect(),
            Err(_) => vec![0.0; p],
        }
    };
    let intercept = y_mean - weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
    CellModel { weights, intercept, input_means: means }
}

fn column_means(xs: &[Vec<f64>], p: usize) -> Vec<f64> {
    let n = xs.len().max(1) as f64;
    (0..p).map(|c| xs.iter().map(|x| x[c]).sum::<f64>() / n).collect()
}

/// Recursive `K`-step rollout from a history of exactly `T` months.
///
/// Explanatory features for future months are held at the last observed
/// month's values. Each step's prediction is clamped at 0 before being fed
/// back as a lagged count. Returns `[step][flat cell]`.
pub fn predict<F: Forecaster + ?Sized>(model: &F, history: &SpatioTemporalTensor) -> Result<Vec<Vec<f64>>> {
    let window = model.history_window();
    if history.len() != window {
        return Err(Error::ShapeMismatch(format!("history has {} months, model needs {window}", history.len())));
    }
    if history.grid != *model.grid() {
        return Err(Error::ShapeMismatch("history grid differs from the model grid".into()));
    }
    let channels = ChannelMap::of(history)?;
    let last = window - 1;
    let n_cells = model.grid().len();

    let mut lags: Vec<Vec<f64>> = (0..n_cells)
        .map(|cell| (0..window).map(|s| history.plane(s, channels.count)[cell]).collect())
        .collect();
    let features: Vec<Vec<f64>> = (0..n_cells)
        .map(|cell| channels.features.iter().map(|&c| history.plane(last, c)[cell]).collect())
        .collect();

    let mut out = Vec::with_capacity(model.horizon());
    let mut inputs = Vec::with_capacity(FEATURE_COUNT + window);
    for _ in 0..model.horizon() {
        let mut step = Vec::with_capacity(n_cells);
        for cell in 0..n_cells {
            inputs.clear();
            inputs.extend_from_slice(&features[cell]);
            inputs.extend_from_slice(&lags[cell]);
            let y = model.predict_cell(cell, &inputs).max(0.0);
            step.push(y);
            lags[cell].remove(0);
            lags[cell].push(y);
        }
        out.push(step);
    }
    Ok(out)
}
