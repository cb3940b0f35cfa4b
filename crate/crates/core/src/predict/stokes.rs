//! Quadratic verification mode of the predictor energy.
//!
//! With the data term replaced by its linear part `u . g`, the energy
//! `sum u.g + mu |grad u|^2 + lambda_d (div u)^2` is quadratic and its
//! stationarity condition is the Stokes system
//! `-2 mu lap(u) + grad(p_h) + g = 0` with `p_h = -2 lambda_d div(u)`.
//! `g` is the image gradient with its mean removed, which keeps the right-hand
//! side orthogonal to the constant flows the energy cannot see.

use super::{FlowPair, PredictorConfig};
use crate::error::{Error, Result};
use crate::fields::{check_min_dims, diff_adjoint, diff_x, diff_y, ScalarField2D, VectorField2D};

/// Stopping rule for the conjugate-gradient minimizer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StokesOptions {
    /// Relative 2-norm of the energy gradient at which to stop.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for StokesOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 50_000,
        }
    }
}

/// Mean-free image gradient, packed as `[gx, gy]`.
fn forcing(img: &ScalarField2D) -> Vec<f64> {
    let (h, w) = img.dims();
    let mut gx = diff_x(img.data(), h, w);
    let mut gy = diff_y(img.data(), h, w);
    for g in [&mut gx, &mut gy] {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        g.iter_mut().for_each(|a| *a -= m);
    }
    [gx, gy].concat()
}

/// Hessian `2 mu G'G + 2 lambda_d D'D` applied to a packed flow.
fn hessian(p: &[f64], h: usize, w: usize, mu: f64, ld: f64) -> Vec<f64> {
    let n = h * w;
    let (u, v) = p.split_at(n);
    let (ux, uy) = (diff_x(u, h, w), diff_y(u, h, w));
    let (vx, vy) = (diff_x(v, h, w), diff_y(v, h, w));
    let div = add(&ux, &vy);
    let mut out = vec![0.0; 2 * n];
    let terms = [
        (0, 0, &ux, 2.0 * mu),
        (0, 1, &uy, 2.0 * mu),
        (1, 0, &vx, 2.0 * mu),
        (1, 1, &vy, 2.0 * mu),
        (0, 0, &div, 2.0 * ld),
        (1, 1, &div, 2.0 * ld),
    ];
    for (comp, axis, q, k) in terms {
        let adj = diff_adjoint(q, h, w, axis);
        for (o, a) in out[comp * n..(comp + 1) * n].iter_mut().zip(adj) {
            *o += k * a;
        }
    }
    out
}

fn energy_one(u: &[f64], g: &[f64], h: usize, w: usize, mu: f64, ld: f64) -> f64 {
    let n = h * w;
    let (a, b) = u.split_at(n);
    let (ax, ay, bx, by) = (diff_x(a, h, w), diff_y(a, h, w), diff_x(b, h, w), diff_y(b, h, w));
    let lin: f64 = u.iter().zip(g).map(|(p, q)| p * q).sum();
    let mut smooth = 0.0;
    let mut div = 0.0;
    for i in 0..n {
        smooth += ax[i] * ax[i] + ay[i] * ay[i] + bx[i] * bx[i] + by[i] * by[i];
        div += (ax[i] + by[i]).powi(2);
    }
    lin + mu * smooth + ld * div
}

fn check(i1: &ScalarField2D, i2: &ScalarField2D, cfg: &PredictorConfig) -> Result<(usize, usize)> {
    i1.ensure_same_dims(i2.dims())?;
    let (h, w) = i1.dims();
    check_min_dims(h, w, 5)?;
    if !(cfg.mu() > 0.0) {
        return Err(Error::InvalidParameter("the quadratic mode needs a positive smoothness weight".into()));
    }
    Ok((h, w))
}

/// Quadratic energy of both flows.
pub fn stokes_energy(flows: &FlowPair, i1: &ScalarField2D, i2: &ScalarField2D, cfg: &PredictorConfig) -> Result<f64> {
    let (h, w) = check(i1, i2, cfg)?;
    flows.validate()?;
    flows.forward.ensure_same_dims((h, w))?;
    let pf = [flows.forward.u(), flows.forward.v()].concat();
    let pb = [flows.backward.u(), flows.backward.v()].concat();
    Ok(energy_one(&pf, &forcing(i1), h, w, cfg.mu(), cfg.lambda_d)
        + energy_one(&pb, &forcing(i2), h, w, cfg.mu(), cfg.lambda_d))
}

/// Minimizes the quadratic energy of each direction by conjugate gradients.
/// The forward flow is driven by the gradient of `i1`, the backward flow by
/// that of `i2`.
pub fn solve_stokes_quadratic(
    i1: &ScalarField2D,
    i2: &ScalarField2D,
    cfg: &PredictorConfig,
    opts: &StokesOptions,
) -> Result<FlowPair> {
    let (h, w) = check(i1, i2, cfg)?;
    let solve = |g: Vec<f64>| -> Result<VectorField2D> {
        let x = cg(&g, h, w, cfg.mu(), cfg.lambda_d, opts)?;
        let (u, v) = x.split_at(h * w);
        VectorField2D::from_vecs(h, w, u.to_vec(), v.to_vec())
    };
    Ok(FlowPair {
        forward: solve(forcing(i1))?,
        backward: solve(forcing(i2))?,
    })
}

fn cg(g: &[f64], h: usize, w: usize, mu: f64, ld: f64, opts: &StokesOptions) -> Result<Vec<f64>> {
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut x = vec![0.0; g.len()];
    let mut r: Vec<f64> = g.iter().map(|a| -a).collect();
    let target = opts.tolerance * dot(g, g).sqrt();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..opts.max_iterations {
        if rr.sqrt() <= target {
            return Ok(x);
        }
        let ap = hessian(&p, h, w, mu, ld);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            break;
        }
        let alpha = rr / pap;
        for i in 0..x.len() {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..x.len() {
            p[i] = r[i] + beta * p[i];
        }
    }
    if rr.sqrt() <= target {
        return Ok(x);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iterations,
        residual: rr.sqrt() / dot(g, g).sqrt().max(f64::MIN_POSITIVE),
        target: opts.tolerance,
    })
}

/// Relative norm of `-2 mu lap(u) + grad(p_h) + g` over nodes at least two
/// steps from the border, both directions combined. Falls back to the
/// absolute norm when the image gradient vanishes.
pub fn stokes_residual(flows: &FlowPair, i1: &ScalarField2D, i2: &ScalarField2D, cfg: &PredictorConfig) -> Result<f64> {
    let (h, w) = check(i1, i2, cfg)?;
    flows.validate()?;
    flows.forward.ensure_same_dims((h, w))?;
    let (mu, ld) = (cfg.mu(), cfg.lambda_d);
    let mut num = 0.0;
    let mut den = 0.0;
    for (flow, img) in [(&flows.forward, i1), (&flows.backward, i2)] {
        let g = forcing(img);
        let (u, v) = (flow.u(), flow.v());
        let (ux, uy, vx, vy) = (diff_x(u, h, w), diff_y(u, h, w), diff_x(v, h, w), diff_y(v, h, w));
        let lap_u = add(&diff_x(&ux, h, w), &diff_y(&uy, h, w));
        let lap_v = add(&diff_x(&vx, h, w), &diff_y(&vy, h, w));
        let ph: Vec<f64> = add(&ux, &vy).iter().map(|d| -2.0 * ld * d).collect();
        let (px, py) = (diff_x(&ph, h, w), diff_y(&ph, h, w));
        let n = h * w;
        for y in 2..h - 2 {
            for x in 2..w - 2 {
                let i = y * w + x;
                let ru = -2.0 * mu * lap_u[i] + px[i] + g[i];
                let rv = -2.0 * mu * lap_v[i] + py[i] + g[n + i];
                num += ru * ru + rv * rv;
                den += g[i] * g[i] + g[n + i] * g[n + i];
            }
        }
    }
    Ok(if den > 0.0 { (num / den).sqrt() } else { num.sqrt() })
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
