//! Transport of scalar fields along a displacement field.
//!
//! Both operators gather: the value at node `x` is read from around
//! `x - w(x)` (Gaussian) or `x ± w(x)` (bilinear). Sample coordinates are
//! clamped to the grid.

use crate::error::{Error, Result};
use crate::fields::{ScalarField2D, VectorField2D};

/// Parameters of the Gaussian transport kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WarpConfig {
    /// Diffusion coefficient in pixel² per frame.
    pub diffusion: f64,
    /// Time interval in frames.
    pub dt: f64,
    /// Kernel half-width in standard deviations.
    pub truncation: f64,
}

impl WarpConfig {
    pub const DEFAULT_TRUNCATION: f64 = 4.0;

    pub fn new(diffusion: f64, dt: f64) -> Self {
        Self {
            diffusion,
            dt,
            truncation: Self::DEFAULT_TRUNCATION,
        }
    }

    pub fn with_truncation(mut self, truncation: f64) -> Self {
        self.truncation = truncation;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.diffusion >= 0.0) || !self.diffusion.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "diffusion must be finite and non-negative, got {}",
                self.diffusion
            )));
        }
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "time interval must be positive, got {}",
                self.dt
            )));
        }
        if !(self.truncation >= 3.0) {
            return Err(Error::InvalidParameter(format!(
                "kernel truncation must be at least 3 standard deviations, got {}",
                self.truncation
            )));
        }
        Ok(())
    }

    /// Kernel variance `2 D dt` per axis.
    pub fn variance(&self) -> f64 {
        2.0 * self.diffusion * self.dt
    }

    /// Half-width of the square kernel window in pixels.
    pub fn radius(&self) -> usize {
        (self.truncation * self.variance().sqrt()).ceil() as usize
    }
}

/// Which end of the displacement a bilinear warp samples from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    /// `out(x) = f(x + w(x))`
    Plus,
    /// `out(x) = f(x - w(x))`
    Minus,
}

impl Direction {
    fn sign(self) -> f64 {
        match self {
            Direction::Plus => 1.0,
            Direction::Minus => -1.0,
        }
    }
}

/// Advects `f` by `w` and diffuses it with the heat kernel of variance
/// `2 D dt`, truncated and renormalized per output node.
pub fn warp_gaussian(f: &ScalarField2D, w: &VectorField2D, cfg: &WarpConfig) -> Result<ScalarField2D> {
    cfg.validate()?;
    f.ensure_same_dims(w.dims())?;
    let (h, wd) = f.dims();
    if cfg.diffusion == 0.0 {
        return warp_bilinear(f, w, Direction::Minus);
    }
    let var = cfg.variance();
    let r = cfg.radius() as isize;
    let inv = 1.0 / (2.0 * var);
    let data = f.data();
    let mut out = vec![0.0; h * wd];
    let mut wx = Vec::with_capacity(2 * r as usize + 2);
    let mut wy = Vec::with_capacity(2 * r as usize + 2);
    for y in 0..h {
        for x in 0..wd {
            let (du, dv) = w.get(x, y);
            let cx = clamp(x as f64 - du, wd);
            let cy = clamp(y as f64 - dv, h);
            let x0 = (cx.floor() as isize - r).max(0) as usize;
            let x1 = (cx.ceil() as isize + r).min(wd as isize - 1) as usize;
            let y0 = (cy.floor() as isize - r).max(0) as usize;
            let y1 = (cy.ceil() as isize + r).min(h as isize - 1) as usize;
            // The kernel is separable, so the window weights factor.
            wx.clear();
            wx.extend((x0..=x1).map(|i| (-(i as f64 - cx).powi(2) * inv).exp()));
            wy.clear();
            wy.extend((y0..=y1).map(|j| (-(j as f64 - cy).powi(2) * inv).exp()));
            let norm: f64 = wx.iter().sum::<f64>() * wy.iter().sum::<f64>();
            let mut acc = 0.0;
            for (j, ky) in (y0..=y1).zip(&wy) {
                let row = &data[j * wd + x0..=j * wd + x1];
                let s: f64 = row.iter().zip(&wx).map(|(a, k)| a * k).sum();
                acc += ky * s;
            }
            out[y * wd + x] = acc / norm;
        }
    }
    ScalarField2D::from_vec(h, wd, out)
}

/// Bilinear resampling of `f` at `x ± w(x)`.
pub fn warp_bilinear(f: &ScalarField2D, w: &VectorField2D, direction: Direction) -> Result<ScalarField2D> {
    f.ensure_same_dims(w.dims())?;
    let (h, wd) = f.dims();
    let s = direction.sign();
    Ok(ScalarField2D::from_fn(h, wd, |x, y| {
        let (du, dv) = w.get(x, y);
        sample_bilinear(f.data(), h, wd, x as f64 + s * du, y as f64 + s * dv)
    }))
}

#[inline]
fn clamp(p: f64, n: usize) -> f64 {
    p.clamp(0.0, (n - 1) as f64)
}

/// Lower cell corner and fractional offset for a clamped coordinate.
#[inline]
fn cell(p: f64, n: usize) -> (usize, f64) {
    if n == 1 {
        return (0, 0.0);
    }
    let p = clamp(p, n);
    let i = (p.floor() as usize).min(n - 2);
    (i, p - i as f64)
}

/// Bilinear sample of a row-major plane at `(px, py)`, clamped to the grid.
#[inline]
pub(crate) fn sample_bilinear(data: &[f64], h: usize, w: usize, px: f64, py: f64) -> f64 {
    let (x0, fx) = cell(px, w);
    let (y0, fy) = cell(py, h);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let a = data[y0 * w + x0];
    let b = data[y0 * w + x1];
    let c = data[y1 * w + x0];
    let d = data[y1 * w + x1];
    (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d)
}

/// Bilinear sample and its derivatives with respect to `px` and `py`.
/// Derivatives vanish along an axis where the coordinate was clamped.
#[inline]
pub(crate) fn sample_bilinear_grad(data: &[f64], h: usize, w: usize, px: f64, py: f64) -> (f64, f64, f64) {
    let (x0, fx) = cell(px, w);
    let (y0, fy) = cell(py, h);
    let x1 = (x0 + 1).min(w - 1);
    let y1 = (y0 + 1).min(h - 1);
    let a = data[y0 * w + x0];
    let b = data[y0 * w + x1];
    let c = data[y1 * w + x0];
    let d = data[y1 * w + x1];
    let val = (1.0 - fy) * ((1.0 - fx) * a + fx * b) + fy * ((1.0 - fx) * c + fx * d);
    let inside = |p: f64, n: usize| p > 0.0 && p < (n - 1) as f64;
    let gx = if inside(px, w) {
        (1.0 - fy) * (b - a) + fy * (d - c)
    } else {
        0.0
    };
    let gy = if inside(py, h) {
        (1.0 - fx) * (c - a) + fx * (d - b)
    } else {
        0.0
    };
    (val, gx, gy)
}

/// Bilinear sample of a vector field at `(px, py)`.
#[inline]
pub(crate) fn sample_vector(w: &VectorField2D, px: f64, py: f64) -> (f64, f64) {
    let (h, wd) = w.dims();
    (
        sample_bilinear(w.u(), h, wd, px, py),
        sample_bilinear(w.v(), h, wd, px, py),
    )
}
