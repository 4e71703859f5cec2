//! The three-piece non-convex smoothing penalty and its per-pixel proximal map.
//!
//! `phi` is quadratic on `[0, T)`, concave on `[T, T2)` and flat beyond `T2`,
//! with minimum curvature `-a`. Its prox with weight `beta1` is a radial
//! rescaling of the input vector, unique whenever `beta1 > a`.

use crate::error::{Error, Result};
use crate::grid::{GradField, ImageGrid};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiParams {
    a: f64,
    t: f64,
    t2: f64,
}

impl PhiParams {
    pub fn new(a: f64, t: f64, t2: f64) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::ParameterDomain(format!("a > 0 required, got {a}")));
        }
        if !(t > 0.0 && t.is_finite()) {
            return Err(Error::ParameterDomain(format!("T > 0 required, got {t}")));
        }
        if !(t2 > t && t2.is_finite()) {
            return Err(Error::ParameterDomain(format!(
                "T2 > T required, got T = {t}, T2 = {t2}"
            )));
        }
        Ok(Self { a, t, t2 })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    /// `sup phi = a T2 (T2 - T) / 2`.
    pub fn plateau(&self) -> f64 {
        self.a * self.t2 * (self.t2 - self.t) / 2.0
    }

    /// Branch evaluation without the sign check on `t`.
    pub fn eval(&self, t: f64) -> f64 {
        let PhiParams { a, t: knee, t2 } = *self;
        if t < knee {
            a * (t2 - knee) * t * t / (2.0 * knee)
        } else if t < t2 {
            -0.5 * a * t * t + a * t2 * t - a * knee * t2 / 2.0
        } else {
            self.plateau()
        }
    }
}

pub fn phi(t: f64, params: &PhiParams) -> Result<f64> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::ParameterDomain(format!(
            "phi is defined on t >= 0, got {t}"
        )));
    }
    Ok(params.eval(t))
}

/// `sum_ij phi(‖m_ij‖_2)`.
pub fn field_penalty(m: &GradField, params: &PhiParams) -> f64 {
    m.horizontal
        .as_slice()
        .iter()
        .zip(m.vertical.as_slice())
        .map(|(h, v)| params.eval(h.hypot(*v)))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShrinkCoefficients {
    pub kappa0: f64,
    pub kappa1: f64,
    pub kappa2: f64,
    pub kappa3: f64,
    pub beta1: f64,
    pub t2: f64,
}

pub fn shrink_coefficients(params: &PhiParams, beta1: f64) -> Result<ShrinkCoefficients> {
    let a = params.a();
    if beta1.is_nan() || beta1 <= a {
        return Err(Error::NonConvexSubproblem { beta1, a });
    }
    let (t, t2) = (params.t(), params.t2());
    let kappa0 = t + (a / beta1) * (t2 - t);
    Ok(ShrinkCoefficients {
        kappa0,
        kappa1: t / kappa0,
        kappa2: beta1 / (beta1 - a),
        kappa3: a * t2 / (beta1 - a),
        beta1,
        t2,
    })
}

impl ShrinkCoefficients {
    /// Radial scale factor `zeta` for an input of norm `norm`.
    pub fn zeta(&self, norm: f64) -> f64 {
        if norm < self.kappa0 {
            self.kappa1
        } else if norm < self.t2 {
            self.kappa2 - self.kappa3 / norm
        } else {
            1.0
        }
    }
}

/// Minimizer of `phi(‖m‖) + (beta1 / 2) ‖m - r‖^2` over 2-vectors `m`.
pub fn phi_prox(r: [f64; 2], coeffs: &ShrinkCoefficients) -> [f64; 2] {
    // kappa0 > 0, so a zero input always lands in the first branch.
    let zeta = coeffs.zeta(r[0].hypot(r[1]));
    [zeta * r[0], zeta * r[1]]
}

/// Applies [`phi_prox`] independently at every pixel.
pub fn prox_field(target: &GradField, coeffs: &ShrinkCoefficients) -> GradField {
    let (rows, cols) = target.shape();
    let mut h = Vec::with_capacity(rows * cols);
    let mut v = Vec::with_capacity(rows * cols);
    for (&x, &y) in target
        .horizontal
        .as_slice()
        .iter()
        .zip(target.vertical.as_slice())
    {
        let [px, py] = phi_prox([x, y], coeffs);
        h.push(px);
        v.push(py);
    }
    GradField {
        horizontal: ImageGrid::from_vec(rows, cols, h).expect("shape preserved"),
        vertical: ImageGrid::from_vec(rows, cols, v).expect("shape preserved"),
    }
}

/// Objective minimized by [`prox_field`] at `m` for the given `target`.
pub fn prox_objective(m: &GradField, target: &GradField, params: &PhiParams, beta1: f64) -> f64 {
    let d = m.distance(target);
    field_penalty(m, params) + 0.5 * beta1 * d * d
}
