//! Standard normal CDF, the centered bivariate normal density and its
//! half-plane integral in the first coordinate.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Determinant floor for strict positive definiteness.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Symmetric 2x2 covariance matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceMatrix2 {
    pub s11: f64,
    pub s12: f64,
    pub s22: f64,
}

impl CovarianceMatrix2 {
    /// Accepts positive semi-definite input only.
    pub fn new(s11: f64, s12: f64, s22: f64) -> Result<Self> {
        let m = Self { s11, s12, s22 };
        if !(s11.is_finite() && s12.is_finite() && s22.is_finite()) {
            return invalid("covariance entries must be finite");
        }
        if s11 < 0.0 || s22 < 0.0 || m.det() < -DEGENERACY_TOL {
            return invalid(format!("covariance matrix is not PSD: {m:?}"));
        }
        Ok(m)
    }

    pub fn identity() -> Self {
        Self {
            s11: 1.0,
            s12: 0.0,
            s22: 1.0,
        }
    }

    pub fn diag(s11: f64, s22: f64) -> Result<Self> {
        Self::new(s11, 0.0, s22)
    }

    pub fn det(&self) -> f64 {
        self.s11 * self.s22 - self.s12 * self.s12
    }

    pub fn is_positive_definite(&self) -> bool {
        self.det() > DEGENERACY_TOL && self.s22 > DEGENERACY_TOL
    }

    pub fn require_positive_definite(&self) -> Result<()> {
        if self.is_positive_definite() {
            Ok(())
        } else {
            Err(Error::DegenerateCovariance { det: self.det() })
        }
    }

    /// Quadratic form `t^T A t`.
    pub fn quad_form(&self, t1: f64, t2: f64) -> f64 {
        self.s11 * t1 * t1 + 2.0 * self.s12 * t1 * t2 + self.s22 * t2 * t2
    }
}

/// Standard normal distribution function.
pub fn phi_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t * FRAC_1_SQRT_2)
}

/// Centered normal density with variance `var` at `y`.
pub fn normal_density(var: f64, y: f64) -> f64 {
    (-0.5 * y * y / var).exp() / (2.0 * PI * var).sqrt()
}

/// Density of the centered Gaussian with covariance `a` at `(x, y)`.
pub fn gamma_density(a: &CovarianceMatrix2, x: f64, y: f64) -> Result<f64> {
    a.require_positive_definite()?;
    let det = a.det();
    let q = (a.s22 * x * x - 2.0 * a.s12 * x * y + a.s11 * y * y) / det;
    Ok((-0.5 * q).exp() / (2.0 * PI * det.sqrt()))
}

/// `psi_A(x, y) = int_{-inf}^x gamma_A(t, y) dt`, via Gaussian conditioning:
/// the marginal density of the second coordinate times the conditional CDF
/// of the first.
pub fn psi_kernel(a: &CovarianceMatrix2, x: f64, y: f64) -> Result<f64> {
    a.require_positive_definite()?;
    Ok(psi_unchecked(a, x, y))
}

/// `psi_kernel` without the definiteness check, for hot loops that have
/// validated `a` once.
#[inline]
pub(crate) fn psi_unchecked(a: &CovarianceMatrix2, x: f64, y: f64) -> f64 {
    let cond_sd = (a.det() / a.s22).sqrt();
    let cond_mean = a.s12 / a.s22 * y;
    normal_density(a.s22, y) * phi_cdf((x - cond_mean) / cond_sd)
}
