//! Image completion and segmentation with a low-rank, convex-non-convex model.
//!
//! The solver minimizes
//!
//! ```text
//! lambda/2 ‖P(U - B)‖_F^2 + sum_ij phi(‖(DU)_ij‖_2; T, a) + ‖U‖_*
//! ```
//!
//! where `D` is the periodic forward-difference gradient, `phi` a
//! three-piece penalty that is quadratic near zero and flat for large
//! gradients, and `‖.‖_*` the nuclear norm. ADMM splits the problem into
//! an FFT-diagonalized linear solve, singular value thresholding and a
//! closed-form per-pixel shrinkage.
//!
//! ```
//! use lrcnc::{apply_mask, derive_params, make_mask, ImageGrid, Problem, SolverConfig};
//!
//! let truth = ImageGrid::from_fn(16, 16, |i, j| if i < 8 { 0.2 } else { 0.2 + 0.01 * j as f64 });
//! let mask = make_mask(16, 16, 0.5, 7).unwrap();
//! let observed = apply_mask(&truth, &mask).unwrap();
//! let params = derive_params(&SolverConfig::completion()).unwrap();
//! let solution = Problem::with_observed(&observed, &params, &mask.observed)
//!     .unwrap()
//!     .run(Some(&truth))
//!     .unwrap();
//! assert!(solution.trace.iterations() > 0);
//! ```

pub mod admm;
pub mod error;
pub mod grid;
pub mod io;
pub mod low_rank;
pub mod metrics;
pub mod params;
pub mod penalty;
pub mod segmentation;
pub mod spectral;

pub use admm::{
    init_state, run, IterationRecord, IterationTrace, Problem, Solution, SolverState, Status,
};
pub use error::{Error, Result};
pub use grid::{d1, d2, div_adjoint, grad, reshape_bands, split_bands, GradField, ImageGrid};
pub use io::{apply_mask, export_trace, load_image, make_mask, save_image, Mask};
pub use low_rank::{nuclear_norm, svd, svt, SvdFactors};
pub use metrics::{psnr, rel_change, ssim, PsnrMode, QualityReport};
pub use params::{derive_params, SolverConfig, SolverParams};
pub use penalty::{phi, phi_prox, prox_field, shrink_coefficients, PhiParams, ShrinkCoefficients};
pub use segmentation::{
    add_gaussian_noise, kmeans, segment_image, Clustering, KMeansOptions, NoiseSpec,
};
pub use spectral::{build_denominator, spectral_solve, SpectralDenominator};
