//! Solver knobs and the derivation of `lambda`, `beta1`, `beta2`.
//!
//! `lambda = 9 a tau1` keeps the fidelity-plus-penalty functional strictly
//! convex (`lambda > 9a`). The ADMM penalties come from the convergence
//! bounds parameterized by `rho1 > 1` and `rho2 > 3`:
//!
//! ```text
//! beta1 = tau2 * max{ a / (rho1 - 1), 2 a rho1 / (rho1 - 1)^2 }
//! beta2 = tau3 * min{ rho2 (lambda - 8a) / (rho2 - 1), 2 rho2 (lambda - 8a) / (rho2 - 1)^2 }
//! ```

use std::fmt;

use crate::error::{Error, Result};
use crate::penalty::PhiParams;

pub const DEFAULT_TOL: f64 = 1e-4;
pub const DEFAULT_MAX_ITER: usize = 1000;
pub const DEFAULT_T2: f64 = 1.0;

/// User-facing knobs before derivation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub a: f64,
    pub t: f64,
    pub t2: f64,
    pub rho1: f64,
    pub rho2: f64,
    pub tau1: f64,
    pub tau2: f64,
    pub tau3: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl SolverConfig {
    /// Image completion profile: `a = 0.1, T = 1e-6, rho1 = tau1 = tau2 = 2.5,
    /// rho2 = 3.001, tau3 = 1.0001`.
    pub fn completion() -> Self {
        Self {
            a: 0.1,
            t: 1e-6,
            t2: DEFAULT_T2,
            rho1: 2.5,
            rho2: 3.001,
            tau1: 2.5,
            tau2: 2.5,
            tau3: 1.0001,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }

    /// Segmentation profile: as completion but `rho2 = 10.001` and `a`
    /// raised to 0.2 for noise levels of 0.2 and above.
    pub fn segmentation(noise_level: f64) -> Self {
        Self {
            a: segmentation_a(noise_level),
            rho2: 10.001,
            ..Self::completion()
        }
    }
}

/// Non-convexity strength used for a given Gaussian noise mean.
pub fn segmentation_a(noise_level: f64) -> f64 {
    if noise_level >= 0.2 {
        0.2
    } else {
        0.1
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ParamWarning {
    /// `tau3 >= 1` puts `beta2` at or above its strict upper bound.
    Beta2AtOrAboveBound { tau3: f64, bound: f64, beta2: f64 },
}

impl fmt::Display for ParamWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamWarning::Beta2AtOrAboveBound { tau3, bound, beta2 } => write!(
                f,
                "tau3 = {tau3} gives beta2 = {beta2:.6} which does not stay strictly below {bound:.6}"
            ),
        }
    }
}

/// Knobs plus derived quantities; only constructed through [`derive_params`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub config: SolverConfig,
    pub phi: PhiParams,
    pub lambda: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub mu: f64,
    pub warnings: Vec<ParamWarning>,
}

fn require(ok: bool, what: &str, detail: impl FnOnce() -> String) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::ParameterDomain(format!("{what} ({})", detail())))
    }
}

pub fn derive_params(config: &SolverConfig) -> Result<SolverParams> {
    let c = *config;
    require(c.a > 0.0 && c.a.is_finite(), "a > 0", || {
        format!("a = {}", c.a)
    })?;
    require(c.t > 0.0 && c.t.is_finite(), "T > 0", || {
        format!("T = {}", c.t)
    })?;
    require(c.t2 > c.t && c.t2.is_finite(), "T2 > T", || {
        format!("T = {}, T2 = {}", c.t, c.t2)
    })?;
    require(c.rho1 > 1.0 && c.rho1.is_finite(), "rho1 > 1", || {
        format!("rho1 = {}", c.rho1)
    })?;
    require(c.rho2 > 3.0 && c.rho2.is_finite(), "rho2 > 3", || {
        format!("rho2 = {}", c.rho2)
    })?;
    require(c.tau1 > 1.0 && c.tau1.is_finite(), "tau1 > 1", || {
        format!("tau1 = {}", c.tau1)
    })?;
    require(c.tau2 >= 1.0 && c.tau2.is_finite(), "tau2 >= 1", || {
        format!("tau2 = {}", c.tau2)
    })?;
    require(c.tau3 > 0.0 && c.tau3.is_finite(), "tau3 > 0", || {
        format!("tau3 = {}", c.tau3)
    })?;
    require(c.tol > 0.0 && c.tol.is_finite(), "tol > 0", || {
        format!("tol = {}", c.tol)
    })?;
    require(c.max_iter >= 1, "max_iter >= 1", || "max_iter = 0".into())?;

    let phi = PhiParams::new(c.a, c.t, c.t2)?;
    let lambda = c.tau1 * 9.0 * c.a;
    let mu = lambda - 9.0 * c.a;
    require(mu > 0.0, "lambda > 9a", || format!("lambda = {lambda}"))?;
    require(lambda > 8.0 * c.a, "lambda > 8a", || {
        format!("lambda = {lambda}")
    })?;

    let r1 = c.rho1 - 1.0;
    let beta1 = c.tau2 * (c.a / r1).max(2.0 * c.a * c.rho1 / (r1 * r1));
    require(beta1 > c.a, "beta1 > a", || {
        format!("beta1 = {beta1}, a = {}", c.a)
    })?;

    let r2 = c.rho2 - 1.0;
    let excess = lambda - 8.0 * c.a;
    let bound = (c.rho2 * excess / r2).min(2.0 * c.rho2 * excess / (r2 * r2));
    let beta2 = c.tau3 * bound;
    require(beta2 > 0.0 && beta2.is_finite(), "beta2 > 0", || {
        format!("beta2 = {beta2}")
    })?;

    let mut warnings = Vec::new();
    if c.tau3 >= 1.0 {
        warnings.push(ParamWarning::Beta2AtOrAboveBound {
            tau3: c.tau3,
            bound,
            beta2,
        });
    }

    Ok(SolverParams {
        config: c,
        phi,
        lambda,
        beta1,
        beta2,
        mu,
        warnings,
    })
}
