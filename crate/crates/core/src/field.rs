//! Scalar fields sampled at grid cell centres.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Grid;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridField {
    grid: Grid,
    values: Vec<f64>,
}

impl GridField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(
                "values",
                format!("{} values for a grid of {} cells", values.len(), grid.len()),
            ));
        }
        Ok(GridField { grid, values })
    }

    pub fn constant(grid: Grid, value: f64) -> Self {
        let n = grid.len();
        GridField {
            grid,
            values: vec![value; n],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Nearest-cell evaluation.
    #[inline]
    pub fn value_at(&self, x: &[f64]) -> f64 {
        self.values[self.grid.nearest_cell(x)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Riemann sum `Σ value · cell volume`.
    pub fn integral(&self) -> f64 {
        crate::stats::pairwise_sum(&self.values) * self.grid.cell_volume()
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }
}
