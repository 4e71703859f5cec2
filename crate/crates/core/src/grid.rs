//! Dense image and gradient containers plus the periodic difference operators.
//!
//! `d1` and `d2` are right multiplication by the circulant `C1` and left
//! multiplication by `C2`: forward differences with wraparound along columns
//! and rows respectively. `div_adjoint` is their exact Frobenius adjoint.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Real `rows x cols` matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageGrid {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl ImageGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::EmptyGrid { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(Error::BufferLength {
                rows,
                cols,
                len: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("ImageGrid::from_vec"));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a grid from a closure over `(row, col)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        assert!(rows > 0 && cols > 0, "grid dimensions must be positive");
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_shape(&self, other: &ImageGrid) -> Result<()> {
        if self.shape() != other.shape() {
            return Err(Error::shape(self.shape(), other.shape()));
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        ImageGrid {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination. Panics on shape mismatch.
    pub fn zip_map(&self, other: &ImageGrid, f: impl Fn(f64, f64) -> f64) -> ImageGrid {
        assert_eq!(self.shape(), other.shape(), "zip_map shape mismatch");
        ImageGrid {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += alpha * other`.
    pub fn axpy(&mut self, alpha: f64, other: &ImageGrid) {
        assert_eq!(self.shape(), other.shape(), "axpy shape mismatch");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }

    pub fn scale(&mut self, alpha: f64) {
        self.data.iter_mut().for_each(|v| *v *= alpha);
    }

    /// Frobenius inner product `trace(A^T B)`.
    pub fn inner(&self, other: &ImageGrid) -> f64 {
        assert_eq!(self.shape(), other.shape(), "inner shape mismatch");
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn transpose(&self) -> ImageGrid {
        ImageGrid::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    /// `‖self - other‖_F`.
    pub fn distance(&self, other: &ImageGrid) -> f64 {
        assert_eq!(self.shape(), other.shape(), "distance shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

impl Index<(usize, usize)> for ImageGrid {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for ImageGrid {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Per-pixel 2-vector field: `horizontal` holds the `D1` component and
/// `vertical` the `D2` component.
#[derive(Debug, Clone, PartialEq)]
pub struct GradField {
    pub horizontal: ImageGrid,
    pub vertical: ImageGrid,
}

impl GradField {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            horizontal: ImageGrid::zeros(rows, cols),
            vertical: ImageGrid::zeros(rows, cols),
        }
    }

    pub fn new(horizontal: ImageGrid, vertical: ImageGrid) -> Result<Self> {
        horizontal.ensure_same_shape(&vertical)?;
        Ok(Self {
            horizontal,
            vertical,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.horizontal.shape()
    }

    pub fn ensure_shape(&self, shape: (usize, usize)) -> Result<()> {
        if self.shape() != shape {
            return Err(Error::shape(shape, self.shape()));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.horizontal.is_finite() && self.vertical.is_finite()
    }

    pub fn inner(&self, other: &GradField) -> f64 {
        self.horizontal.inner(&other.horizontal) + self.vertical.inner(&other.vertical)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    pub fn axpy(&mut self, alpha: f64, other: &GradField) {
        self.horizontal.axpy(alpha, &other.horizontal);
        self.vertical.axpy(alpha, &other.vertical);
    }

    pub fn distance(&self, other: &GradField) -> f64 {
        let h = self.horizontal.distance(&other.horizontal);
        let v = self.vertical.distance(&other.vertical);
        (h * h + v * v).sqrt()
    }

    /// Pixel 2-vector at `(i, j)`.
    pub fn pixel(&self, i: usize, j: usize) -> [f64; 2] {
        [self.horizontal[(i, j)], self.vertical[(i, j)]]
    }
}

/// `U C1`: `out[i][j] = u[i][(j+1) mod n2] - u[i][j]`.
pub fn d1(u: &ImageGrid) -> ImageGrid {
    let n2 = u.cols();
    ImageGrid::from_fn(u.rows(), n2, |i, j| u[(i, (j + 1) % n2)] - u[(i, j)])
}

/// `C2 U`: `out[i][j] = u[(i+1) mod n1][j] - u[i][j]`.
pub fn d2(u: &ImageGrid) -> ImageGrid {
    let n1 = u.rows();
    ImageGrid::from_fn(n1, u.cols(), |i, j| u[((i + 1) % n1, j)] - u[(i, j)])
}

pub fn grad(u: &ImageGrid) -> GradField {
    GradField {
        horizontal: d1(u),
        vertical: d2(u),
    }
}

/// `D^T m = D1^T m_h + D2^T m_v`, the negative periodic divergence.
pub fn div_adjoint(m: &GradField) -> ImageGrid {
    let (n1, n2) = m.shape();
    let h = &m.horizontal;
    let v = &m.vertical;
    ImageGrid::from_fn(n1, n2, |i, j| {
        let left = (j + n2 - 1) % n2;
        let up = (i + n1 - 1) % n1;
        (h[(i, left)] - h[(i, j)]) + (v[(up, j)] - v[(i, j)])
    })
}

/// `D^T D u` evaluated through the operators; used for residual checks.
pub fn normal_operator(u: &ImageGrid) -> ImageGrid {
    div_adjoint(&grad(u))
}

/// Concatenates equally shaped bands horizontally: `n1 x n2 x n3` becomes
/// `n1 x (n2 n3)` with band `b` occupying columns `b n2 .. (b+1) n2`.
pub fn reshape_bands(bands: &[ImageGrid]) -> Result<ImageGrid> {
    let first = bands.first().ok_or(Error::EmptyStack)?;
    for band in &bands[1..] {
        first.ensure_same_shape(band)?;
    }
    let (n1, n2) = first.shape();
    let n3 = bands.len();
    Ok(ImageGrid::from_fn(n1, n2 * n3, |i, j| {
        bands[j / n2][(i, j % n2)]
    }))
}

/// Inverse of [`reshape_bands`].
pub fn split_bands(matrix: &ImageGrid, bands: usize) -> Result<Vec<ImageGrid>> {
    if bands == 0 || !matrix.cols().is_multiple_of(bands) {
        return Err(Error::ParameterDomain(format!(
            "cannot split {} columns into {} bands",
            matrix.cols(),
            bands
        )));
    }
    let n2 = matrix.cols() / bands;
    Ok((0..bands)
        .map(|b| ImageGrid::from_fn(matrix.rows(), n2, |i, j| matrix[(i, b * n2 + j)]))
        .collect())
}
