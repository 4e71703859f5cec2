//! ADMM iteration for
//!
//! ```text
//! min_U  lambda/2 ‖P(U - B)‖_F^2 + sum_ij phi(‖(DU)_ij‖) + ‖U‖_*
//! ```
//!
//! split as `DU = M`, `U = Z` with multipliers `Q` (on `DU - M`) and `O`
//! (on `U - Z`). Each sweep updates `U`, `Z`, `M`, then both multipliers.
//! `P` keeps observed pixels; with every pixel observed it is the identity
//! and the U-update is a single FFT solve.

use crate::error::{Error, Result};
use crate::grid::{div_adjoint, grad, GradField, ImageGrid};
use crate::low_rank::svt;
use crate::metrics::{psnr, rel_change, PsnrMode};
use crate::params::SolverParams;
use crate::penalty::{prox_field, shrink_coefficients, ShrinkCoefficients};
use crate::spectral::MaskedSystem;

/// Primal variables and multipliers of the augmented Lagrangian.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: ImageGrid,
    pub z: ImageGrid,
    pub m: GradField,
    pub q: GradField,
    pub o: ImageGrid,
    pub k: usize,
}

impl SolverState {
    pub fn is_finite(&self) -> bool {
        self.u.is_finite()
            && self.z.is_finite()
            && self.m.is_finite()
            && self.q.is_finite()
            && self.o.is_finite()
    }

    /// `‖DU - M‖_F`.
    pub fn primal_gap(&self) -> f64 {
        grad(&self.u).distance(&self.m)
    }

    /// `‖U - Z‖_F`.
    pub fn coupling_gap(&self) -> f64 {
        self.u.distance(&self.z)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Status {
    #[default]
    NotRun,
    Converged,
    MaxIterations,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::NotRun => "not_run",
            Status::Converged => "converged",
            Status::MaxIterations => "max_iter",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    /// 1-based sweep index.
    pub iter: usize,
    pub rel_change: f64,
    pub primal_gap: f64,
    pub coupling_gap: f64,
    pub psnr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct IterationTrace {
    pub records: Vec<IterationRecord>,
    pub status: Status,
}

impl IterationTrace {
    pub fn iterations(&self) -> usize {
        self.records.len()
    }

    pub fn last(&self) -> Option<&IterationRecord> {
        self.records.last()
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub image: ImageGrid,
    pub trace: IterationTrace,
    pub state: SolverState,
}

/// An observed image with its solver parameters and precomputed operators.
#[derive(Debug, Clone)]
pub struct Problem {
    observed: ImageGrid,
    params: SolverParams,
    coeffs: ShrinkCoefficients,
    system: MaskedSystem,
    psnr_mode: PsnrMode,
}

impl Problem {
    /// Fully observed data: the fidelity term covers every pixel.
    pub fn new(b: &ImageGrid, params: &SolverParams) -> Result<Self> {
        Self::build(b, params, None)
    }

    /// Data observed only where `observed` is true (row-major). Unobserved
    /// entries of `b` are ignored.
    pub fn with_observed(b: &ImageGrid, params: &SolverParams, observed: &[bool]) -> Result<Self> {
        Self::build(b, params, Some(observed))
    }

    fn build(b: &ImageGrid, params: &SolverParams, observed: Option<&[bool]>) -> Result<Self> {
        if !b.is_finite() {
            return Err(Error::NonFinite("observed image"));
        }
        let coeffs = shrink_coefficients(&params.phi, params.beta1)?;
        let system = MaskedSystem::new(
            b.rows(),
            b.cols(),
            params.lambda,
            params.beta2,
            params.beta1,
            observed,
        )?;
        let mut observed_b = b.clone();
        if let Some(mask) = observed {
            for (v, &seen) in observed_b.as_mut_slice().iter_mut().zip(mask) {
                if !seen {
                    *v = 0.0;
                }
            }
        }
        Ok(Self {
            observed: observed_b,
            params: params.clone(),
            coeffs,
            system,
            psnr_mode: PsnrMode::Mse,
        })
    }

    pub fn with_psnr_mode(mut self, mode: PsnrMode) -> Self {
        self.psnr_mode = mode;
        self
    }

    pub fn params(&self) -> &SolverParams {
        &self.params
    }

    /// The zero-filled observation `B`.
    pub fn observed(&self) -> &ImageGrid {
        &self.observed
    }

    /// `U = Z = B`, `M = DB`, `Q = O = 0`.
    pub fn init_state(&self) -> SolverState {
        init_state(&self.observed)
    }

    /// One ADMM sweep.
    pub fn step(&self, state: &mut SolverState) -> Result<()> {
        let SolverParams {
            lambda,
            beta1,
            beta2,
            ..
        } = self.params;
        let b = &self.observed;
        if state.u.shape() != b.shape() {
            return Err(Error::shape(b.shape(), state.u.shape()));
        }
        let iteration = state.k + 1;

        // U: (lambda P + beta2 I + beta1 D^T D) U = lambda P B + beta1 D^T M - D^T Q + beta2 Z - O
        let mut rhs = b.clone();
        rhs.scale(lambda);
        rhs.axpy(beta1, &div_adjoint(&state.m));
        rhs.axpy(-1.0, &div_adjoint(&state.q));
        rhs.axpy(beta2, &state.z);
        rhs.axpy(-1.0, &state.o);
        if !rhs.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        let u = self
            .system
            .solve(&rhs, &state.u)
            .map_err(|_| Error::Divergence { iteration })?;

        // Z: prox of ‖.‖_* / beta2 at U + O / beta2.
        let mut shifted = u.clone();
        shifted.axpy(1.0 / beta2, &state.o);
        let z = svt(&shifted, 1.0 / beta2).map_err(|_| Error::Divergence { iteration })?;

        // M: per-pixel prox at DU + Q / beta1.
        let du = grad(&u);
        let mut target = du.clone();
        target.axpy(1.0 / beta1, &state.q);
        let m = prox_field(&target, &self.coeffs);

        let mut q = state.q.clone();
        q.axpy(beta1, &du);
        q.axpy(-beta1, &m);
        let mut o = state.o.clone();
        o.axpy(beta2, &u);
        o.axpy(-beta2, &z);

        *state = SolverState {
            u,
            z,
            m,
            q,
            o,
            k: iteration,
        };
        if !state.is_finite() {
            return Err(Error::Divergence { iteration });
        }
        Ok(())
    }

    /// Iterates until `‖U^{k+1} - U^k‖_F / ‖U^k‖_F <= tol` or `max_iter`.
    ///
    /// The test is skipped on the first sweep: starting from `U = B` the
    /// first U-update reproduces `B` exactly.
    pub fn run(&self, reference: Option<&ImageGrid>) -> Result<Solution> {
        if let Some(r) = reference {
            r.ensure_same_shape(&self.observed)?;
        }
        let config = &self.params.config;
        let mut state = self.init_state();
        let mut records = Vec::new();
        let mut status = Status::MaxIterations;
        for _ in 0..config.max_iter {
            let previous = state.u.clone();
            self.step(&mut state)?;
            let rel = rel_change(&state.u, &previous)?;
            let quality = match reference {
                Some(r) => Some(psnr(r, &state.u, self.psnr_mode)?),
                None => None,
            };
            records.push(IterationRecord {
                iter: state.k,
                rel_change: rel,
                primal_gap: state.primal_gap(),
                coupling_gap: state.coupling_gap(),
                psnr: quality,
            });
            if state.k >= 2 && rel <= config.tol {
                status = Status::Converged;
                break;
            }
        }
        Ok(Solution {
            image: state.u.clone(),
            trace: IterationTrace { records, status },
            state,
        })
    }
}

pub fn init_state(b: &ImageGrid) -> SolverState {
    let (rows, cols) = b.shape();
    SolverState {
        u: b.clone(),
        z: b.clone(),
        m: grad(b),
        q: GradField::zeros(rows, cols),
        o: ImageGrid::zeros(rows, cols),
        k: 0,
    }
}

/// Runs the solver on fully observed data.
pub fn run(
    b: &ImageGrid,
    params: &SolverParams,
    reference: Option<&ImageGrid>,
) -> Result<Solution> {
    Problem::new(b, params)?.run(reference)
}
