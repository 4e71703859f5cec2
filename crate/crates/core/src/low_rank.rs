//! Thin SVD, nuclear norm and singular value thresholding.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::ImageGrid;

/// Thin SVD `A = U diag(s) V^T` with `k = min(rows, cols)` triplets,
/// singular values sorted nonincreasing.
#[derive(Debug, Clone)]
pub struct SvdFactors {
    /// `rows x k`, column-orthonormal.
    pub u_basis: DMatrix<f64>,
    pub singulars: Vec<f64>,
    /// `cols x k`, column-orthonormal.
    pub v_basis: DMatrix<f64>,
}

impl SvdFactors {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    /// Rebuilds `U diag(f(s)) V^T`, skipping triplets mapped to zero.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ImageGrid {
        let rows = self.u_basis.nrows();
        let cols = self.v_basis.nrows();
        let mut out = vec![0.0; rows * cols];
        for (idx, &s) in self.singulars.iter().enumerate() {
            let w = f(s);
            if w == 0.0 {
                continue;
            }
            let u = self.u_basis.column(idx);
            let v = self.v_basis.column(idx);
            for i in 0..rows {
                let wu = w * u[i];
                let row = &mut out[i * cols..(i + 1) * cols];
                for (o, vj) in row.iter_mut().zip(v.iter()) {
                    *o += wu * vj;
                }
            }
        }
        ImageGrid::from_vec(rows, cols, out).expect("finite factors")
    }

    pub fn reconstruct(&self) -> ImageGrid {
        self.reconstruct_with(|s| s)
    }
}

pub(crate) fn to_matrix(a: &ImageGrid) -> DMatrix<f64> {
    DMatrix::from_row_slice(a.rows(), a.cols(), a.as_slice())
}

pub fn svd(a: &ImageGrid) -> Result<SvdFactors> {
    if !a.is_finite() {
        return Err(Error::NonFinite("svd input"));
    }
    let decomposition = to_matrix(a).svd(true, true);
    let u = decomposition.u.expect("requested U");
    let v_t = decomposition.v_t.expect("requested V^T");
    let singulars = decomposition.singular_values.as_slice().to_vec();

    let mut order: Vec<usize> = (0..singulars.len()).collect();
    order.sort_by(|&i, &j| singulars[j].total_cmp(&singulars[i]));
    let k = order.len();
    let mut u_basis = DMatrix::zeros(a.rows(), k);
    let mut v_basis = DMatrix::zeros(a.cols(), k);
    let mut sorted = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        u_basis.set_column(dst, &u.column(src));
        v_basis.set_column(dst, &v_t.row(src).transpose());
        sorted.push(singulars[src].max(0.0));
    }
    if sorted.iter().any(|s| !s.is_finite()) {
        return Err(Error::NonFinite("singular values"));
    }
    Ok(SvdFactors {
        u_basis,
        singulars: sorted,
        v_basis,
    })
}

/// `U max(S - tau, 0) V^T`: the prox of `tau ‖.‖_*`.
pub fn svt(a: &ImageGrid, tau: f64) -> Result<ImageGrid> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(Error::ParameterDomain(format!(
            "threshold must be positive, got {tau}"
        )));
    }
    Ok(svd(a)?.reconstruct_with(|s| (s - tau).max(0.0)))
}

pub fn nuclear_norm(a: &ImageGrid) -> Result<f64> {
    if !a.is_finite() {
        return Err(Error::NonFinite("nuclear_norm input"));
    }
    Ok(to_matrix(a).singular_values().iter().sum())
}
