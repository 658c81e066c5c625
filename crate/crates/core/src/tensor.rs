//! Minimal dense containers: row-major matrices, 4-D conv kernel banks, and
//! shaped tensors. All storage is `Vec<f64>`; nothing here allocates on the
//! hot paths beyond construction.

use crate::error::{invalid, Error, Result};

/// Row-major `rows x cols` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(invalid("matrix", "need at least one row"));
        }
        let cols = rows[0].len();
        if cols == 0 {
            return Err(invalid("matrix", "need at least one column"));
        }
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (r, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(invalid(
                    "matrix",
                    format!("row {r} has {} entries, expected {cols}", row.len()),
                ));
            }
            data.extend_from_slice(row);
        }
        Ok(Matrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_flat(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::ShapeMismatch(format!(
                "matrix buffer has {} entries, expected {rows}x{cols}",
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_norm(&self, r: usize) -> f64 {
        self.row(r).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|r| self.row(r).to_vec()).collect()
    }
}

/// Bank of conv kernels, laid out `[out_c][in_c][kh][kw]` row-major, so the
/// flattened kernel of one output channel is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernels {
    out_c: usize,
    in_c: usize,
    kh: usize,
    kw: usize,
    data: Vec<f64>,
}

impl Kernels {
    pub fn zeros(out_c: usize, in_c: usize, kh: usize, kw: usize) -> Self {
        Kernels {
            out_c,
            in_c,
            kh,
            kw,
            data: vec![0.0; out_c * in_c * kh * kw],
        }
    }

    pub fn from_nested(nested: Vec<Vec<Vec<Vec<f64>>>>) -> Result<Self> {
        if nested.is_empty()
            || nested[0].is_empty()
            || nested[0][0].is_empty()
            || nested[0][0][0].is_empty()
        {
            return Err(invalid(
                "kernels",
                "all four kernel dimensions must be at least 1",
            ));
        }
        let (out_c, in_c, kh, kw) = (
            nested.len(),
            nested[0].len(),
            nested[0][0].len(),
            nested[0][0][0].len(),
        );
        let mut data = Vec::with_capacity(out_c * in_c * kh * kw);
        for (o, per_in) in nested.iter().enumerate() {
            if per_in.len() != in_c {
                return Err(invalid(
                    "kernels",
                    format!(
                        "kernel {o} has {} input channels, expected {in_c}",
                        per_in.len()
                    ),
                ));
            }
            for (i, rows) in per_in.iter().enumerate() {
                if rows.len() != kh {
                    return Err(invalid(
                        "kernels",
                        format!(
                            "kernel {o} channel {i} has {} rows, expected {kh}",
                            rows.len()
                        ),
                    ));
                }
                for (r, row) in rows.iter().enumerate() {
                    if row.len() != kw {
                        return Err(invalid(
                            "kernels",
                            format!(
                                "kernel {o} channel {i} row {r} has {} entries, expected {kw}",
                                row.len()
                            ),
                        ));
                    }
                    data.extend_from_slice(row);
                }
            }
        }
        Ok(Kernels {
            out_c,
            in_c,
            kh,
            kw,
            data,
        })
    }

    pub fn out_channels(&self) -> usize {
        self.out_c
    }

    pub fn in_channels(&self) -> usize {
        self.in_c
    }

    pub fn spatial(&self) -> (usize, usize) {
        (self.kh, self.kw)
    }

    fn idx(&self, o: usize, i: usize, r: usize, c: usize) -> usize {
        ((o * self.in_c + i) * self.kh + r) * self.kw + c
    }

    pub fn get(&self, o: usize, i: usize, r: usize, c: usize) -> f64 {
        self.data[self.idx(o, i, r, c)]
    }

    pub fn set(&mut self, o: usize, i: usize, r: usize, c: usize, v: f64) {
        let idx = self.idx(o, i, r, c);
        self.data[idx] = v;
    }

    /// Flattened kernel of output channel `o` (length `in_c * kh * kw`).
    pub fn kernel_flat(&self, o: usize) -> &[f64] {
        let stride = self.in_c * self.kh * self.kw;
        &self.data[o * stride..(o + 1) * stride]
    }

    pub fn kernel_norm(&self, o: usize) -> f64 {
        self.kernel_flat(o)
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn to_nested(&self) -> Vec<Vec<Vec<Vec<f64>>>> {
        (0..self.out_c)
            .map(|o| {
                (0..self.in_c)
                    .map(|i| {
                        (0..self.kh)
                            .map(|r| (0..self.kw).map(|c| self.get(o, i, r, c)).collect())
                            .collect()
                    })
                    .collect()
            })
            .collect()
    }
}

/// A shaped, row-major value flowing through the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expect: usize = shape.iter().product();
        if shape.is_empty() || shape.contains(&0) {
            return Err(Error::ShapeMismatch(format!(
                "invalid tensor shape {shape:?}"
            )));
        }
        if data.len() != expect {
            return Err(Error::ShapeMismatch(format!(
                "tensor data has {} entries, shape {shape:?} needs {expect}",
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    /// 1-D tensor from a plain vector.
    pub fn vector(data: Vec<f64>) -> Result<Self> {
        let len = data.len();
        Tensor::new(vec![len], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Flattens to 1-D, preserving row-major order.
    pub fn flattened(&self) -> Tensor {
        Tensor {
            shape: vec![self.data.len()],
            data: self.data.clone(),
        }
    }

    /// Element of a 3-D `[c, h, w]` tensor.
    pub fn get3(&self, c: usize, y: usize, x: usize) -> f64 {
        debug_assert_eq!(self.shape.len(), 3);
        self.data[(c * self.shape[1] + y) * self.shape[2] + x]
    }
}
