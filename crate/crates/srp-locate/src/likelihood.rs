//! Spatial likelihood maps over a candidate grid, with CSV and PGM export.

use std::fs;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::geometry::{CandidateGrid, Point3};

/// A scalar field over the candidate grid. `values[(iy, ix)]` scores the
/// cell centred at grid point (ix, iy); higher means more likely.
#[derive(Debug, Clone)]
pub struct LikelihoodGrid {
    pub values: Array2<f64>,
    pub grid: CandidateGrid,
}

impl LikelihoodGrid {
    pub fn new(values: Array2<f64>, grid: CandidateGrid) -> Result<Self> {
        let (rows, cols) = values.dim();
        if rows != grid.side || cols != grid.side {
            return Err(Error::GridShapeMismatch {
                left: rows.max(cols),
                right: grid.side,
            });
        }
        Ok(LikelihoodGrid { values, grid })
    }

    pub fn zeros(grid: CandidateGrid) -> Self {
        LikelihoodGrid {
            values: Array2::zeros((grid.side, grid.side)),
            grid,
        }
    }

    /// Grid cell (ix, iy) of the maximum value. Ties resolve to the lowest
    /// linear index iy * G + ix; any non-finite value is an error.
    pub fn argmax(&self) -> Result<(usize, usize)> {
        let mut best: Option<(usize, f64)> = None;
        for (linear, &v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteGrid);
            }
            match best {
                Some((_, bv)) if v <= bv => {}
                _ => best = Some((linear, v)),
            }
        }
        let (linear, _) = best.expect("grid has at least 2x2 cells");
        Ok(self.grid.cell_of(linear))
    }

    /// Position estimate: the centre of the argmax cell.
    pub fn estimate(&self) -> Result<Point3> {
        let (ix, iy) = self.argmax()?;
        Ok(self.grid.point(ix, iy))
    }

    /// Min-max rescaled copy with values in [0, 1]. A constant map becomes
    /// all zeros.
    pub fn normalized(&self) -> LikelihoodGrid {
        let min = self.values.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let span = max - min;
        let values = if span > 0.0 {
            self.values.mapv(|v| (v - min) / span)
        } else {
            Array2::zeros(self.values.dim())
        };
        LikelihoodGrid {
            values,
            grid: self.grid.clone(),
        }
    }

    /// CSV text: one row per grid row, row 0 at the smallest y, columns in
    /// increasing x.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for iy in 0..self.grid.side {
            for ix in 0..self.grid.side {
                if ix > 0 {
                    out.push(',');
                }
                out.push_str(&format!("{:.12e}", self.values[(iy, ix)]));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// 8-bit grayscale PGM of the min-max normalized map. Image rows run
    /// top-down, so the top row is the largest y and the map reads like a
    /// floor plan viewed from above.
    pub fn write_pgm(&self, path: &Path) -> Result<()> {
        let normalized = self.normalized();
        let side = self.grid.side;
        let mut out = format!("P2\n{side} {side}\n255\n");
        for iy in (0..side).rev() {
            let row: Vec<String> = (0..side)
                .map(|ix| format!("{}", (normalized.values[(iy, ix)] * 255.0).round() as u8))
                .collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}
