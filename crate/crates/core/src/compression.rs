//! Numeric reference versions of the two visual-token compression schemes:
//! squeezing a query bank by group averaging (query-based samplers) and
//! average-pooling an encoder feature map (MLP-based samplers).

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CompressionError {
    #[error("factor must be >= 1")]
    ZeroFactor,
    #[error("factor {factor} does not divide {extent}")]
    NonDivisible { factor: usize, extent: usize },
    #[error("shape {0} has a zero dimension or does not match the data length")]
    Shape(String),
}

/// `rows × dim` query token weights, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryBank {
    rows: usize,
    dim: usize,
    data: Vec<f64>,
}

impl QueryBank {
    pub fn new(rows: usize, dim: usize, data: Vec<f64>) -> Result<Self, CompressionError> {
        if rows == 0 || dim == 0 || data.len() != rows * dim {
            return Err(CompressionError::Shape(format!("{rows}x{dim}")));
        }
        Ok(Self { rows, dim, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// `height × width` grid of `dim`-channel vectors, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureGrid {
    height: usize,
    width: usize,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureGrid {
    pub fn new(height: usize, width: usize, dim: usize, data: Vec<f64>) -> Result<Self, CompressionError> {
        if height == 0 || width == 0 || dim == 0 || data.len() != height * width * dim {
            return Err(CompressionError::Shape(format!("{height}x{width}x{dim}")));
        }
        Ok(Self {
            height,
            width,
            dim,
            data,
        })
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn cell(&self, y: usize, x: usize) -> &[f64] {
        let at = (y * self.width + x) * self.dim;
        &self.data[at..at + self.dim]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }
}

/// Row `i` of the result is the mean of input rows `[i·α, (i+1)·α)`.
pub fn squeeze_queries(bank: &QueryBank, alpha: usize) -> Result<QueryBank, CompressionError> {
    if alpha == 0 {
        return Err(CompressionError::ZeroFactor);
    }
    if !bank.rows.is_multiple_of(alpha) {
        return Err(CompressionError::NonDivisible {
            factor: alpha,
            extent: bank.rows,
        });
    }
    let out_rows = bank.rows / alpha;
    let mut data = Vec::with_capacity(out_rows * bank.dim);
    for group in 0..out_rows {
        for c in 0..bank.dim {
            let sum: f64 = (group * alpha..(group + 1) * alpha).map(|r| bank.row(r)[c]).sum();
            data.push(sum / alpha as f64);
        }
    }
    QueryBank::new(out_rows, bank.dim, data)
}

/// Average 2D pooling with a `p × p` window and stride `p`, per channel.
pub fn pool_features(grid: &FeatureGrid, p: usize) -> Result<FeatureGrid, CompressionError> {
    if p == 0 {
        return Err(CompressionError::ZeroFactor);
    }
    for extent in [grid.height, grid.width] {
        if extent % p != 0 {
            return Err(CompressionError::NonDivisible { factor: p, extent });
        }
    }
    let (out_h, out_w) = (grid.height / p, grid.width / p);
    let count = (p * p) as f64;
    let mut data = Vec::with_capacity(out_h * out_w * grid.dim);
    for oy in 0..out_h {
        for ox in 0..out_w {
            for c in 0..grid.dim {
                let mut sum = 0.0;
                for y in oy * p..(oy + 1) * p {
                    for x in ox * p..(ox + 1) * p {
                        sum += grid.cell(y, x)[c];
                    }
                }
                data.push(sum / count);
            }
        }
    }
    FeatureGrid::new(out_h, out_w, grid.dim, data)
}
