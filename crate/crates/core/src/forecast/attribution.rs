use rayon::prelude::*;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use super::{shapley_exact, ChannelMap, Forecaster};
use crate::error::{Error, Result};
use crate::geo::{CellIndex, GridSpec};
use crate::model::{SpatioTemporalTensor, YearMonth, FEATURE_COUNT, FEATURE_NAMES};

/// Per-month, per-cell Shapley attributions of the one-step prediction.
///
/// Row `t` describes the prediction for `months[t]` made from inputs at the
/// preceding month. Only the five explanatory features are attributed; the
/// lagged counts stay at their observed values, so their contribution is part
/// of `baseline[t]`. For every row and cell,
/// `sum(phi) == predicted - baseline`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributionFrame {
    pub grid: GridSpec,
    pub features: Vec<String>,
    /// Target months, one per row.
    pub months: Vec<YearMonth>,
    /// `[t][cell]`, unclamped model output.
    pub predicted: Vec<Vec<f64>>,
    /// `[t][cell]`, prediction with the five features at their training means.
    pub baseline: Vec<Vec<f64>>,
    /// `[cell]`, prediction with every input at its training mean.
    pub expected: Vec<f64>,
    /// `[t][cell]`, observed counts when the target month is in the tensor.
    pub actual: Vec<Option<Vec<f64>>>,
    /// `[t][feature][cell]`
    phi: Vec<Vec<Vec<f64>>>,
}

impl AttributionFrame {
    pub fn len(&self) -> usize {
        self.months.len()
    }

    pub fn is_empty(&self) -> bool {
        self.months.is_empty()
    }

    pub fn phi(&self, t: usize, feature: usize, cell: usize) -> f64 {
        self.phi[t][feature][cell]
    }

    /// Attributions of all features for one row and cell.
    pub fn phi_row(&self, t: usize, cell: usize) -> [f64; FEATURE_COUNT] {
        std::array::from_fn(|c| self.phi[t][c][cell])
    }

    /// Sector-chart size for a cell: the sum of absolute attributions.
    pub fn abs_phi_sum(&self, t: usize, cell: usize) -> f64 {
        (0..FEATURE_COUNT).map(|c| self.phi[t][c][cell].abs()).sum()
    }

    pub fn row_of(&self, month: YearMonth) -> Option<usize> {
        self.months.iter().position(|&m| m == month)
    }

    /// City-wide sums for row `t`.
    pub fn citywide(&self, t: usize) -> CitywidePoint {
        CitywidePoint {
            month: self.months[t],
            predicted: self.predicted[t].iter().sum(),
            baseline: self.baseline[t].iter().sum(),
            actual: self.actual[t].as_ref().map(|a| a.iter().sum()),
            phi_by_feature: (0..FEATURE_COUNT).map(|c| self.phi[t][c].iter().sum()).collect(),
        }
    }

    pub fn export(&self) -> AttributionExport {
        AttributionExport {
            timestamps: self.months.clone(),
            features: self.features.clone(),
            per_t: (0..self.len()).map(|t| self.citywide(t)).collect(),
            per_cell: self
                .grid
                .cells()
                .map(|cell| {
                    let idx = self.grid.flat(cell);
                    CellAttribution {
                        cell,
                        expected: self.expected[idx],
                        predicted: self.predicted.iter().map(|p| p[idx]).collect(),
                        phi: (0..self.len()).map(|t| self.phi_row(t, idx).to_vec()).collect(),
                        abs_phi_sum: (0..self.len()).map(|t| self.abs_phi_sum(t, idx)).collect(),
                    }
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CitywidePoint {
    pub month: YearMonth,
    pub predicted: f64,
    pub baseline: f64,
    pub actual: Option<f64>,
    /// Signed, in feature order.
    pub phi_by_feature: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct CellAttribution {
    pub cell: CellIndex,
    pub expected: f64,
    pub predicted: Vec<f64>,
    /// `[t][feature]`
    pub phi: Vec<Vec<f64>>,
    pub abs_phi_sum: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct AttributionExport {
    pub timestamps: Vec<YearMonth>,
    pub features: Vec<String>,
    pub per_t: Vec<CitywidePoint>,
    pub per_cell: Vec<CellAttribution>,
}

/// Attributes the model's one-step predictions for every month of `tensor`
/// that has a full lag window, against the model's training means.
///
/// Linear models use `w_c * (x_c - mean_c)`; any other [`Forecaster`] goes
/// through coalition enumeration over the five features.
pub fn attribute<F: Forecaster + ?Sized>(model: &F, tensor: &SpatioTemporalTensor) -> Result<AttributionFrame> {
    if tensor.grid != *model.grid() {
        return Err(Error::ShapeMismatch("tensor grid differs from the model grid".into()));
    }
    let window = model.history_window();
    if tensor.len() < window {
        return Err(Error::InsufficientHistory { needed: window, available: tensor.len() });
    }
    let channels = ChannelMap::of(tensor)?;
    let n_cells = tensor.grid.len();
    let rows: Vec<usize> = (window - 1..tensor.len()).collect();

    // per cell: [(predicted, baseline, phi)] over rows
    type CellRows = Vec<(f64, f64, [f64; FEATURE_COUNT])>;
    let per_cell: Vec<Result<CellRows>> = (0..n_cells)
        .into_par_iter()
        .map(|cell| {
            let mean = model.baseline(cell);
            let mut inputs = Vec::new();
            let mut out = Vec::with_capacity(rows.len());
            for &t in &rows {
                channels.inputs(tensor, t, cell, window, &mut inputs);
                let predicted = model.predict_cell(cell, &inputs);
                let mut at_mean = inputs.clone();
                at_mean[..FEATURE_COUNT].copy_from_slice(&mean[..FEATURE_COUNT]);
                let baseline = model.predict_cell(cell, &at_mean);
                let phi: [f64; FEATURE_COUNT] = match model.linear_part(cell) {
                    Some((w, _)) => std::array::from_fn(|c| w[c] * (inputs[c] - mean[c])),
                    None => {
                        let lags = &inputs[FEATURE_COUNT..];
                        let f = |feats: &[f64]| {
                            let mut full = feats.to_vec();
                            full.extend_from_slice(lags);
                            model.predict_cell(cell, &full)
                        };
                        let v = shapley_exact(f, &inputs[..FEATURE_COUNT], &mean[..FEATURE_COUNT])?;
                        std::array::from_fn(|c| v[c])
                    }
                };
                out.push((predicted, baseline, phi));
            }
            Ok(out)
        })
        .collect();
    let per_cell: Vec<CellRows> = per_cell.into_iter().collect::<Result<_>>()?;

    let mut predicted = vec![vec![0.0; n_cells]; rows.len()];
    let mut baseline = vec![vec![0.0; n_cells]; rows.len()];
    let mut phi = vec![vec![vec![0.0; n_cells]; FEATURE_COUNT]; rows.len()];
    for (cell, cell_rows) in per_cell.iter().enumerate() {
        for (r, (p, b, f)) in cell_rows.iter().enumerate() {
            predicted[r][cell] = *p;
            baseline[r][cell] = *b;
            for c in 0..FEATURE_COUNT {
                phi[r][c][cell] = f[c];
            }
        }
    }
    let months: Vec<YearMonth> = rows.iter().map(|&t| tensor.timestamps[t].add_months(1)).collect();
    let actual = rows
        .iter()
        .map(|&t| (t + 1 < tensor.len()).then(|| tensor.plane(t + 1, channels.count).to_vec()))
        .collect();
    let expected = (0..n_cells).map(|cell| model.predict_cell(cell, model.baseline(cell))).collect();

    Ok(AttributionFrame {
        grid: tensor.grid,
        features: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        months,
        predicted,
        baseline,
        expected,
        actual,
        phi,
    })
}
