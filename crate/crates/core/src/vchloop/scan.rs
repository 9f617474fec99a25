//! Deterministic grid scans of the cost landscape.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cost_at, AnsatzKind, AnsatzSpec, CostMode, CostValue};
use crate::error::{Error, Result};
use crate::estimators::ShotPlan;
use crate::histories::ModelSpec;
use crate::models::{axis_angles, icosphere};

/// `count` evenly spaced values from `start` toward `stop`, endpoint excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub start: f64,
    pub stop: f64,
    pub count: usize,
}

impl Axis {
    pub fn values(&self) -> Vec<f64> {
        let step = (self.stop - self.start) / self.count as f64;
        (0..self.count).map(|i| self.start + i as f64 * step).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Grid {
    /// Cartesian product, one axis per ansatz parameter, last axis fastest.
    Axes(Vec<Axis>),
    /// Stationary Bloch-axis families on icosphere vertices.
    Sphere { subdivisions: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub params: Vec<f64>,
    pub axis: Option<[f64; 3]>,
    pub cost: CostValue,
}

/// Parameter vector and, for sphere grids, the Bloch axis it encodes.
pub type GridPoint = (Vec<f64>, Option<[f64; 3]>);

impl Grid {
    /// Parameter vectors (and sphere axes) in scan order.
    pub fn points(&self, ansatz: &AnsatzSpec) -> Result<Vec<GridPoint>> {
        match self {
            Grid::Axes(axes) => {
                if axes.len() != ansatz.param_count() {
                    return Err(Error::InvalidConfig(format!(
                        "grid has {} axes but the ansatz has {} parameters",
                        axes.len(),
                        ansatz.param_count()
                    )));
                }
                if axes.iter().any(|a| a.count == 0) {
                    return Err(Error::InvalidConfig("grid axes need at least one point".into()));
                }
                let values: Vec<Vec<f64>> = axes.iter().map(Axis::values).collect();
                let total: usize = values.iter().map(Vec::len).product();
                let mut out = Vec::with_capacity(total);
                for mut idx in 0..total {
                    let mut p = vec![0.0; values.len()];
                    for d in (0..values.len()).rev() {
                        p[d] = values[d][idx % values[d].len()];
                        idx /= values[d].len();
                    }
                    out.push((p, None));
                }
                Ok(out)
            }
            Grid::Sphere { subdivisions } => {
                if ansatz.kind != AnsatzKind::BlochAxis {
                    return Err(Error::InvalidConfig("sphere grids need the bloch-axis ansatz".into()));
                }
                let reps = if ansatz.stationary { 1 } else { ansatz.k };
                icosphere(*subdivisions)
                    .vertices
                    .into_iter()
                    .map(|v| {
                        let (theta, phi) = axis_angles(v)?;
                        Ok((std::iter::repeat_n([theta, phi], reps).flatten().collect(), Some(v)))
                    })
                    .collect()
            }
        }
    }
}

/// Evaluates the cost at every grid point. Points run in parallel on the
/// current rayon pool; row order and per-point seeds depend only on the grid.
pub fn landscape_scan(model: &ModelSpec, ansatz: &AnsatzSpec, grid: &Grid, mode: CostMode, plan: &ShotPlan) -> Result<Vec<ScanRow>> {
    let points = grid.points(ansatz)?;
    points
        .into_par_iter()
        .enumerate()
        .map(|(i, (params, axis))| {
            let cost = cost_at(model, ansatz, &params, mode, &plan.derive_index(i as u64))?;
            Ok(ScanRow { params, axis, cost })
        })
        .collect()
}
