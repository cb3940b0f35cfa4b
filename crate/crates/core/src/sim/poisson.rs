//! Pressure projection onto discretely divergence-free fields.
//!
//! The potential `phi` is found so that `u = u* - grad(phi)` has zero
//! divergence at every interior node and prescribed normal flux through each
//! wall. Wall flux is measured on the face between the boundary node and its
//! inner neighbour, as the average of their normal velocities. With the
//! canonical stencils this gives a symmetric negative semi-definite system
//! whose null space is the constants, solved by conjugate gradients.
//! The four corner nodes do not enter the interior divergence; their
//! potential is filled in by bilinear extrapolation after the solve.

use crate::error::{Error, Result};
use crate::fields::{check_min_dims, diff_x, diff_y, ScalarField2D, VectorField2D};

/// Prescribed outward normal velocity on each wall, in pixels per frame.
/// Zero everywhere is the no-through-flow condition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct WallFlux {
    pub left: f64,
    pub right: f64,
    pub bottom: f64,
    pub top: f64,
}

/// Stopping rule for the conjugate-gradient solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Stop once the max-norm residual falls below `tolerance` times the
    /// max-norm of the right-hand side.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 5000,
        }
    }
}

/// Outcome of a projection.
#[derive(Debug, Clone)]
pub struct Projection {
    pub velocity: VectorField2D,
    /// Physical pressure `(rho / dt) * phi`, zero mean over non-corner nodes.
    pub pressure: ScalarField2D,
    pub iterations: usize,
    /// Final relative max-norm residual.
    pub residual: f64,
}

/// Removes the gradient part of `u_star` under no-through-flow walls.
pub fn pressure_project(
    u_star: &VectorField2D,
    rho: f64,
    dt: f64,
    opts: &SolverOptions,
) -> Result<Projection> {
    pressure_project_with_flux(u_star, rho, dt, &WallFlux::default(), opts)
}

/// As [`pressure_project`], with prescribed normal flux on each wall.
pub fn pressure_project_with_flux(
    u_star: &VectorField2D,
    rho: f64,
    dt: f64,
    flux: &WallFlux,
    opts: &SolverOptions,
) -> Result<Projection> {
    let (h, w) = u_star.dims();
    check_min_dims(h, w, 3)?;
    if !(rho > 0.0) || !(dt > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "density and time step must be positive, got rho = {rho}, dt = {dt}"
        )));
    }
    if !(opts.tolerance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "solver tolerance must be positive, got {}",
            opts.tolerance
        )));
    }
    if !u_star.is_finite() {
        return Err(Error::NonFinite("tentative velocity".into()));
    }
    let op = Operator { h, w };
    let mut b = op.rhs(u_star, flux);
    // Exact compatibility holds only up to rounding and uneven wall fluxes.
    op.remove_mean(&mut b);
    let (phi, iterations, residual) = conjugate_gradient(&op, &b, opts)?;
    let mut phi = phi;
    op.remove_mean(&mut phi);
    op.fill_corners(&mut phi);
    let phi = ScalarField2D::from_vec(h, w, phi)?;
    let velocity = subtract_gradient(u_star, &phi);
    let pressure = phi.map(|a| a * rho / dt);
    Ok(Projection {
        velocity,
        pressure,
        iterations,
        residual,
    })
}

/// `u* - (dt / rho) grad(p)`.
pub fn apply_pressure(u_star: &VectorField2D, pressure: &ScalarField2D, rho: f64, dt: f64) -> Result<VectorField2D> {
    u_star.ensure_same_dims(pressure.dims())?;
    check_min_dims(pressure.height(), pressure.width(), 3)?;
    Ok(subtract_gradient(u_star, &pressure.map(|a| a * dt / rho)))
}

fn subtract_gradient(u_star: &VectorField2D, phi: &ScalarField2D) -> VectorField2D {
    let (h, w) = phi.dims();
    let gx = diff_x(phi.data(), h, w);
    let gy = diff_y(phi.data(), h, w);
    let mut out = u_star.clone();
    for (a, g) in out.u_mut().iter_mut().zip(&gx) {
        *a -= g;
    }
    for (a, g) in out.v_mut().iter_mut().zip(&gy) {
        *a -= g;
    }
    out
}

struct Operator {
    h: usize,
    w: usize,
}

impl Operator {
    fn is_corner(&self, x: usize, y: usize) -> bool {
        (x == 0 || x == self.w - 1) && (y == 0 || y == self.h - 1)
    }

    fn rhs(&self, u: &VectorField2D, flux: &WallFlux) -> Vec<f64> {
        let (h, w) = (self.h, self.w);
        let div = {
            let mut d = diff_x(u.u(), h, w);
            for (a, b) in d.iter_mut().zip(diff_y(u.v(), h, w)) {
                *a += b;
            }
            d
        };
        let (uu, vv) = (u.u(), u.v());
        let mut b = vec![0.0; h * w];
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                b[i] = if self.is_corner(x, y) {
                    0.0
                } else if x == 0 {
                    0.5 * (uu[i] + uu[i + 1]) + flux.left
                } else if x == w - 1 {
                    -0.5 * (uu[i] + uu[i - 1]) + flux.right
                } else if y == 0 {
                    0.5 * (vv[i] + vv[i + w]) + flux.bottom
                } else if y == h - 1 {
                    -0.5 * (vv[i] + vv[i - w]) + flux.top
                } else {
                    div[i]
                };
            }
        }
        b
    }

    /// Applies the (negated, hence positive semi-definite) system matrix.
    fn apply_neg(&self, p: &[f64], out: &mut [f64], gx: &mut Vec<f64>, gy: &mut Vec<f64>) {
        let (h, w) = (self.h, self.w);
        *gx = diff_x(p, h, w);
        *gy = diff_y(p, h, w);
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                out[i] = if self.is_corner(x, y) {
                    p[i]
                } else if x == 0 {
                    -0.5 * (gx[i] + gx[i + 1])
                } else if x == w - 1 {
                    0.5 * (gx[i] + gx[i - 1])
                } else if y == 0 {
                    -0.5 * (gy[i] + gy[i + w])
                } else if y == h - 1 {
                    0.5 * (gy[i] + gy[i - w])
                } else {
                    -(0.5 * (gx[i + 1] - gx[i - 1]) + 0.5 * (gy[i + w] - gy[i - w]))
                };
            }
        }
    }

    fn remove_mean(&self, v: &mut [f64]) {
        let (h, w) = (self.h, self.w);
        let mut sum = 0.0;
        for y in 0..h {
            for x in 0..w {
                if !self.is_corner(x, y) {
                    sum += v[y * w + x];
                }
            }
        }
        let mean = sum / (h * w - 4) as f64;
        for y in 0..h {
            for x in 0..w {
                if !self.is_corner(x, y) {
                    v[y * w + x] -= mean;
                }
            }
        }
    }

    fn fill_corners(&self, p: &mut [f64]) {
        let (h, w) = (self.h, self.w);
        for (x, y, dx, dy) in [
            (0, 0, 1isize, 1isize),
            (w - 1, 0, -1, 1),
            (0, h - 1, 1, -1),
            (w - 1, h - 1, -1, -1),
        ] {
            let xi = (x as isize + dx) as usize;
            let yi = (y as isize + dy) as usize;
            p[y * w + x] = p[y * w + xi] + p[yi * w + x] - p[yi * w + xi];
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Solves `A phi = b` with `-A` positive semi-definite; `b` has zero mean on
/// the coupled nodes and zero on the corners.
fn conjugate_gradient(op: &Operator, b: &[f64], opts: &SolverOptions) -> Result<(Vec<f64>, usize, f64)> {
    let n = b.len();
    let scale = max_abs(b);
    let mut x = vec![0.0; n];
    if scale == 0.0 {
        return Ok((x, 0, 0.0));
    }
    let target = opts.tolerance * scale;
    // Solving (-A) x = -b.
    let mut r: Vec<f64> = b.iter().map(|v| -v).collect();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let (mut gx, mut gy) = (Vec::new(), Vec::new());
    let mut rr = dot(&r, &r);
    let mut res = max_abs(&r);
    for it in 0..opts.max_iterations {
        if res <= target {
            return Ok((x, it, res / scale));
        }
        op.apply_neg(&p, &mut ap, &mut gx, &mut gy);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
        res = max_abs(&r);
        if !res.is_finite() {
            return Err(Error::NonFinite("pressure solve residual".into()));
        }
    }
    if res <= target {
        return Ok((x, opts.max_iterations, res / scale));
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: res / scale,
        target: opts.tolerance,
    })
}
