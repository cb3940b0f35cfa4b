//! Variational optical-flow predictor and the Horn-Schunck baseline.

mod hs;
mod losses;
mod stokes;
mod variational;

pub use hs::{estimate_hs, hs_energy, HsConfig, HsResult};
pub use losses::{
    photometric_loss, photometric_loss_grad, regularizer_loss, regularizer_loss_grad, total_predictor_loss,
    total_predictor_loss_grad, LossTerms,
};
pub(crate) use losses::Crop;
pub use stokes::{solve_stokes_quadratic, stokes_energy, stokes_residual, StokesOptions};
pub use variational::{downsample, estimate_variational, estimate_variational_traced, upsample_flow, Trace};

use crate::error::{Error, Result};
use crate::fields::VectorField2D;

/// Generalized Charbonnier penalty `(x^2 + eps^2)^gamma`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Charbonnier {
    pub gamma: f64,
    pub eps: f64,
}

impl Default for Charbonnier {
    fn default() -> Self {
        Self {
            gamma: 0.45,
            eps: 1e-3,
        }
    }
}

impl Charbonnier {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (x * x + self.eps * self.eps).powf(self.gamma)
    }

    /// Penalty and derivative with a single power evaluation.
    #[inline]
    pub fn eval_deriv(&self, x: f64) -> (f64, f64) {
        let s = x * x + self.eps * self.eps;
        let q = s.powf(self.gamma - 1.0);
        (q * s, 2.0 * self.gamma * x * q)
    }

    /// `d/dx (x^2 + eps^2)^gamma`.
    #[inline]
    pub fn deriv(&self, x: f64) -> f64 {
        2.0 * self.gamma * x * (x * x + self.eps * self.eps).powf(self.gamma - 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "Charbonnier exponent must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Charbonnier epsilon must be positive, got {}",
                self.eps
            )));
        }
        Ok(())
    }
}

/// Elementwise penalty.
pub fn charbonnier(x: f64, gamma: f64, eps: f64) -> f64 {
    Charbonnier { gamma, eps }.eval(x)
}

/// Settings of the variational predictor.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorConfig {
    pub lambda_s: f64,
    pub lambda_d: f64,
    pub penalty: Charbonnier,
    pub levels: usize,
    pub iterations: usize,
    pub step: f64,
    pub betas: (f64, f64),
    /// Width of the border ring excluded from every loss.
    pub ring: usize,
    /// Standard deviation in pixels of the Gaussian blur applied to both
    /// images before estimation; 0 disables it.
    pub presmooth: f64,
}

impl Default for PredictorConfig {
    fn default() -> Self {
        Self {
            lambda_s: 0.05,
            lambda_d: 0.05,
            penalty: Charbonnier::default(),
            levels: 3,
            iterations: 300,
            step: 0.05,
            betas: (0.9, 0.999),
            ring: 2,
            presmooth: 1.0,
        }
    }
}

impl PredictorConfig {
    /// Smoothness coefficient of the equivalent Stokes problem.
    pub fn mu(&self) -> f64 {
        self.lambda_s
    }

    pub fn validate(&self) -> Result<()> {
        self.penalty.validate()?;
        for (name, v) in [("lambda_s", self.lambda_s), ("lambda_d", self.lambda_d)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} must be non-negative, got {v}")));
            }
        }
        if self.levels == 0 {
            return Err(Error::InvalidParameter("at least one pyramid level is required".into()));
        }
        if !(self.presmooth >= 0.0) || !self.presmooth.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "presmoothing width must be non-negative, got {}",
                self.presmooth
            )));
        }
        if !(self.step >= 0.0) {
            return Err(Error::InvalidParameter(format!("step size must be non-negative, got {}", self.step)));
        }
        let (b1, b2) = self.betas;
        if !(b1 > 0.0 && b1 < 1.0 && b2 > 0.0 && b2 < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "moment decays must lie in (0, 1), got ({b1}, {b2})"
            )));
        }
        Ok(())
    }
}

/// Forward and backward flow of one image pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowPair {
    pub forward: VectorField2D,
    pub backward: VectorField2D,
}

impl FlowPair {
    pub fn zeros(h: usize, w: usize) -> Self {
        Self {
            forward: VectorField2D::zeros(h, w),
            backward: VectorField2D::zeros(h, w),
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.forward.dims()
    }

    pub fn validate(&self) -> Result<()> {
        self.forward.ensure_same_dims(self.backward.dims())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn charbonnier_examples() {
        let s0 = charbonnier(0.0, 0.45, 1e-3);
        assert!((s0 - 10f64.powf(-2.7)).abs() < 1e-15);
        assert!((s0 - 1.995e-3).abs() < 1e-6);
        assert_eq!(charbonnier(1.0, 0.5, 0.0), 1.0);
        for x in [0.3, -2.0, 17.5, 1e-4] {
            assert_eq!(charbonnier(x, 0.45, 1e-3), charbonnier(-x, 0.45, 1e-3));
        }
    }

    #[test]
    fn charbonnier_derivative() {
        let c = Charbonnier::default();
        for x in [-1.3, -0.01, 0.2, 3.0] {
            let e = 1e-7;
            let fd = (c.eval(x + e) - c.eval(x - e)) / (2.0 * e);
            assert!((fd - c.deriv(x)).abs() < 1e-6 * (1.0 + fd.abs()));
        }
    }

    #[test]
    fn config_validation() {
        assert!(PredictorConfig::default().validate().is_ok());
        let bad = PredictorConfig {
            penalty: Charbonnier { gamma: 1.5, eps: 1e-3 },
            ..PredictorConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = PredictorConfig {
            lambda_d: -1.0,
            ..PredictorConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!(PredictorConfig::default().mu(), 0.05);
    }
}
