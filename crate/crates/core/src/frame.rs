use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major grey-level image. Also used for `m x m` boxes and templates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Frame {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{} pixels ({rows}x{cols})", rows * cols),
                got: format!("{} pixels", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn square(n: usize, data: Vec<f64>) -> Result<Self> {
        Self::from_vec(n, n, data)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    /// Copies the `height x width` sub-window with top-left corner `(row, col)`.
    pub fn window(&self, row: usize, col: usize, height: usize, width: usize) -> Result<Frame> {
        if row + height > self.rows || col + width > self.cols {
            return Err(Error::OutOfBounds {
                row,
                col,
                size: height.max(width),
                rows: self.rows,
                cols: self.cols,
            });
        }
        let mut data = Vec::with_capacity(height * width);
        for r in row..row + height {
            let start = r * self.cols + col;
            data.extend_from_slice(&self.data[start..start + width]);
        }
        Ok(Frame {
            rows: height,
            cols: width,
            data,
        })
    }

    /// Adds `patch` pixel-wise with its top-left corner at `(row, col)`.
    pub fn add_patch(&mut self, patch: &Frame, row: usize, col: usize) -> Result<()> {
        if row + patch.rows > self.rows || col + patch.cols > self.cols {
            return Err(Error::OutOfBounds {
                row,
                col,
                size: patch.rows.max(patch.cols),
                rows: self.rows,
                cols: self.cols,
            });
        }
        for r in 0..patch.rows {
            let dst = (row + r) * self.cols + col;
            let src = r * patch.cols;
            for (d, s) in self.data[dst..dst + patch.cols]
                .iter_mut()
                .zip(&patch.data[src..src + patch.cols])
            {
                *d += s;
            }
        }
        Ok(())
    }

    fn check_same_shape(&self, other: &Frame) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.rows, self.cols),
                got: format!("{}x{}", other.rows, other.cols),
            });
        }
        Ok(())
    }

    /// Inner product with a frame of identical shape.
    pub fn dot(&self, other: &Frame) -> Result<f64> {
        self.check_same_shape(other)?;
        Ok(self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum())
    }
}
