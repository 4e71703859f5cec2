//! FFT-diagonalized solves of `shift * U + beta1 * D^T D U = R`.
//!
//! `C1` and `C2` are circulant, so `D^T D` is diagonal in the 2-D DFT basis
//! with eigenvalues `4 sin^2(pi p / n1) + 4 sin^2(pi q / n2)`. The forward
//! transform is unnormalized and the inverse carries `1 / (n1 n2)`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::grid::{normal_operator, ImageGrid};

/// Imaginary residue (relative to the largest real magnitude) above which the
/// inverse transform is considered corrupted.
const IMAG_RESIDUE_LIMIT: f64 = 1e-6;

#[derive(Clone)]
struct Fft2d {
    rows: usize,
    cols: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl Fft2d {
    fn new(rows: usize, cols: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            rows,
            cols,
            row_fwd: planner.plan_fft_forward(cols),
            row_inv: planner.plan_fft_inverse(cols),
            col_fwd: planner.plan_fft_forward(rows),
            col_inv: planner.plan_fft_inverse(rows),
        }
    }

    fn process(&self, buf: &mut [Complex<f64>], row: &dyn Fft<f64>, col: &dyn Fft<f64>) {
        row.process(buf);
        let mut column = vec![Complex::default(); self.rows];
        for j in 0..self.cols {
            for (i, c) in column.iter_mut().enumerate() {
                *c = buf[i * self.cols + j];
            }
            col.process(&mut column);
            for (i, c) in column.iter().enumerate() {
                buf[i * self.cols + j] = *c;
            }
        }
    }

    fn forward(&self, buf: &mut [Complex<f64>]) {
        self.process(buf, self.row_fwd.as_ref(), self.col_fwd.as_ref());
    }

    fn inverse(&self, buf: &mut [Complex<f64>]) {
        self.process(buf, self.row_inv.as_ref(), self.col_inv.as_ref());
        let norm = 1.0 / (self.rows * self.cols) as f64;
        buf.iter_mut().for_each(|c| *c *= norm);
    }
}

/// Eigenvalues of `shift I + beta1 D^T D` laid out on the `n1 x n2` frequency grid.
#[derive(Clone)]
pub struct SpectralDenominator {
    rows: usize,
    cols: usize,
    shift: f64,
    beta1: f64,
    entries: Vec<f64>,
    fft: Fft2d,
}

impl fmt::Debug for SpectralDenominator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralDenominator")
            .field("rows", &self.rows)
            .field("cols", &self.cols)
            .field("shift", &self.shift)
            .field("beta1", &self.beta1)
            .finish_non_exhaustive()
    }
}

impl SpectralDenominator {
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    pub fn beta1(&self) -> f64 {
        self.beta1
    }

    /// Entry at frequency `(p, q)`.
    pub fn entry(&self, p: usize, q: usize) -> f64 {
        self.entries[p * self.cols + q]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// `4 sin^2(pi k / n)`, the squared magnitude of the eigenvalue
/// `exp(2 pi i k / n) - 1` of a periodic forward difference.
pub fn difference_eigenvalue(k: usize, n: usize) -> f64 {
    let s = (PI * k as f64 / n as f64).sin();
    4.0 * s * s
}

/// Builds the diagonal of `shift I + beta1 D^T D` in the DFT basis.
///
/// The ADMM U-update uses `shift = lambda + beta2`; passing `shift = lambda`
/// gives the bare fidelity-plus-smoothing operator.
pub fn build_denominator(
    rows: usize,
    cols: usize,
    shift: f64,
    beta1: f64,
) -> Result<SpectralDenominator> {
    if rows == 0 || cols == 0 {
        return Err(Error::EmptyGrid { rows, cols });
    }
    if !(shift > 0.0 && shift.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "spectral shift must be positive, got {shift}"
        )));
    }
    if !(beta1 > 0.0 && beta1.is_finite()) {
        return Err(Error::ParameterDomain(format!(
            "beta1 must be positive, got {beta1}"
        )));
    }
    let row_eigs: Vec<f64> = (0..rows).map(|p| difference_eigenvalue(p, rows)).collect();
    let col_eigs: Vec<f64> = (0..cols).map(|q| difference_eigenvalue(q, cols)).collect();
    let mut entries = Vec::with_capacity(rows * cols);
    for &rp in &row_eigs {
        for &cq in &col_eigs {
            entries.push(shift + beta1 * (rp + cq));
        }
    }
    Ok(SpectralDenominator {
        rows,
        cols,
        shift,
        beta1,
        entries,
        fft: Fft2d::new(rows, cols),
    })
}

/// Solves `shift U + beta1 D^T D U = r` by a forward/inverse 2-D DFT pair.
pub fn spectral_solve(r: &ImageGrid, denom: &SpectralDenominator) -> Result<ImageGrid> {
    if r.shape() != denom.shape() {
        return Err(Error::shape(denom.shape(), r.shape()));
    }
    let mut buf: Vec<Complex<f64>> = r.as_slice().iter().map(|&v| Complex::new(v, 0.0)).collect();
    denom.fft.forward(&mut buf);
    for (c, &d) in buf.iter_mut().zip(&denom.entries) {
        *c /= d;
    }
    denom.fft.inverse(&mut buf);

    let real_max = buf.iter().fold(0.0f64, |m, c| m.max(c.re.abs()));
    let imag_max = buf.iter().fold(0.0f64, |m, c| m.max(c.im.abs()));
    if imag_max > IMAG_RESIDUE_LIMIT * real_max.max(f64::MIN_POSITIVE) && imag_max > 1e-300 {
        return Err(Error::Inconsistent(format!(
            "inverse DFT left imaginary residue {imag_max:e} against real magnitude {real_max:e}"
        )));
    }
    let out = ImageGrid::from_vec(r.rows(), r.cols(), buf.into_iter().map(|c| c.re).collect());
    out.map_err(|_| Error::NonFinite("spectral_solve"))
}

/// Applies `shift U + beta1 D^T D U` directly, for residual checks.
pub fn apply_operator(u: &ImageGrid, shift: f64, beta1: f64) -> ImageGrid {
    let mut out = normal_operator(u);
    out.scale(beta1);
    out.axpy(shift, u);
    out
}

/// The U-system with a masked fidelity term:
/// `(fidelity * W + coupling I + beta1 D^T D) U = R`, `W` a 0/1 diagonal.
///
/// When every pixel is observed the system is circulant and solved exactly
/// by [`spectral_solve`]. Otherwise it is solved by conjugate gradients
/// preconditioned with the circulant system whose diagonal weight is the
/// observed fraction.
#[derive(Debug, Clone)]
pub struct MaskedSystem {
    fidelity: f64,
    coupling: f64,
    beta1: f64,
    observed: Option<Vec<bool>>,
    preconditioner: SpectralDenominator,
    tolerance: f64,
    max_iter: usize,
}

impl MaskedSystem {
    pub fn new(
        rows: usize,
        cols: usize,
        fidelity: f64,
        coupling: f64,
        beta1: f64,
        observed: Option<&[bool]>,
    ) -> Result<Self> {
        let observed = match observed {
            Some(mask) if mask.len() != rows * cols => {
                return Err(Error::BufferLength {
                    rows,
                    cols,
                    len: mask.len(),
                })
            }
            Some(mask) if mask.iter().all(|&o| o) => None,
            Some(mask) => Some(mask.to_vec()),
            None => None,
        };
        let fraction = observed.as_ref().map_or(1.0, |m| {
            m.iter().filter(|&&o| o).count() as f64 / m.len() as f64
        });
        let preconditioner = build_denominator(rows, cols, fidelity * fraction + coupling, beta1)?;
        Ok(Self {
            fidelity,
            coupling,
            beta1,
            observed,
            preconditioner,
            tolerance: 1e-10,
            max_iter: 500,
        })
    }

    pub fn with_tolerance(mut self, tolerance: f64, max_iter: usize) -> Self {
        self.tolerance = tolerance;
        self.max_iter = max_iter;
        self
    }

    pub fn is_circulant(&self) -> bool {
        self.observed.is_none()
    }

    pub fn apply(&self, u: &ImageGrid) -> ImageGrid {
        let mut out = apply_operator(u, self.coupling, self.beta1);
        match &self.observed {
            None => out.axpy(self.fidelity, u),
            Some(mask) => {
                for ((o, &x), &seen) in out.as_mut_slice().iter_mut().zip(u.as_slice()).zip(mask) {
                    if seen {
                        *o += self.fidelity * x;
                    }
                }
            }
        }
        out
    }

    /// Solves the system for `rhs`, warm-starting conjugate gradients at `guess`.
    pub fn solve(&self, rhs: &ImageGrid, guess: &ImageGrid) -> Result<ImageGrid> {
        if self.observed.is_none() {
            return spectral_solve(rhs, &self.preconditioner);
        }
        rhs.ensure_same_shape(guess)?;
        let rhs_norm = rhs.frobenius_norm();
        if rhs_norm == 0.0 {
            return Ok(ImageGrid::zeros(rhs.rows(), rhs.cols()));
        }
        let mut x = guess.clone();
        let mut r = rhs.zip_map(&self.apply(&x), |a, b| a - b);
        let mut z = spectral_solve(&r, &self.preconditioner)?;
        let mut p = z.clone();
        let mut rz = r.inner(&z);
        for _ in 0..self.max_iter {
            if r.frobenius_norm() <= self.tolerance * rhs_norm {
                break;
            }
            let ap = self.apply(&p);
            let alpha = rz / p.inner(&ap);
            if !alpha.is_finite() {
                return Err(Error::NonFinite("masked conjugate gradient"));
            }
            x.axpy(alpha, &p);
            r.axpy(-alpha, &ap);
            z = spectral_solve(&r, &self.preconditioner)?;
            let rz_next = r.inner(&z);
            let gamma = rz_next / rz;
            rz = rz_next;
            p = z.zip_map(&p, |zi, pi| zi + gamma * pi);
        }
        Ok(x)
    }
}
