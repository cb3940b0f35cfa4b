//! Brute-force reference implementations shared by the integration suites.
#![allow(dead_code)]

use fluidest::{ScalarField2D, VectorField2D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

/// Gaussian transport written as a full double sum over every source node,
/// normalized per output node. The kernel centre `x - w(x)` is clamped to
/// the grid like every other sample coordinate.
pub fn dense_gaussian_warp(f: &ScalarField2D, w: &VectorField2D, diffusion: f64, dt: f64) -> ScalarField2D {
    let (h, wd) = f.dims();
    let four_d_dt = 4.0 * diffusion * dt;
    let mut out = ScalarField2D::zeros(h, wd);
    for y in 0..h {
        for x in 0..wd {
            let (du, dv) = w.get(x, y);
            let cx = (x as f64 - du).clamp(0.0, (wd - 1) as f64);
            let cy = (y as f64 - dv).clamp(0.0, (h - 1) as f64);
            let (mut num, mut den) = (0.0, 0.0);
            for sy in 0..h {
                for sx in 0..wd {
                    let d2 = (cx - sx as f64).powi(2) + (cy - sy as f64).powi(2);
                    let k = (-d2 / four_d_dt).exp() / (PI * four_d_dt);
                    num += k * f.get(sx, sy);
                    den += k;
                }
            }
            out.set(x, y, num / den);
        }
    }
    out
}

/// Taylor-Green vortex array on a square `n x n` grid with free-slip walls
/// half a cell inside the outermost nodes: side `L = n - 2`, wavenumber
/// `k = pi m / L`, decay `exp(-2 nu k^2 t)`.
pub fn taylor_green_exact(n: usize, modes: usize, nu: f64, t: f64) -> VectorField2D {
    let l = n as f64 - 2.0;
    let k = PI * modes as f64 / l;
    let decay = (-2.0 * nu * k * k * t).exp();
    VectorField2D::from_fn(n, n, |x, y| {
        let (a, b) = (k * (x as f64 - 0.5), k * (y as f64 - 0.5));
        (a.sin() * b.cos() * decay, -a.cos() * b.sin() * decay)
    })
}

pub fn relative_l2(a: &VectorField2D, b: &VectorField2D) -> f64 {
    let num: f64 = a.u().iter().zip(b.u()).chain(a.v().iter().zip(b.v())).map(|(p, q)| (p - q).powi(2)).sum();
    let den: f64 = b.u().iter().chain(b.v()).map(|q| q * q).sum();
    (num / den).sqrt()
}

pub fn random_field(h: usize, w: usize, lo: f64, hi: f64, seed: u64) -> ScalarField2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ScalarField2D::from_fn(h, w, |_, _| rng.gen_range(lo..hi))
}

pub fn random_flow(h: usize, w: usize, amp: f64, seed: u64) -> VectorField2D {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    VectorField2D::from_fn(h, w, |_, _| (rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
}

/// Smooth test image in `[0, 1]`, shifted by `(sx, sy)`.
pub fn smooth_image(h: usize, w: usize, sx: f64, sy: f64) -> ScalarField2D {
    ScalarField2D::from_fn(h, w, |x, y| {
        let (x, y) = (x as f64 - sx, y as f64 - sy);
        0.5 + 0.2 * (0.45 * x).sin() * (0.35 * y).cos() + 0.15 * (0.25 * x + 0.3 * y).sin()
    })
}

/// Central difference quotient of `f` along each coordinate of `x`,
/// compared with `grad` as a relative 2-norm error.
pub fn fd_relative_error(x: &[f64], grad: &[f64], h: f64, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
    let mut p = x.to_vec();
    let (mut num, mut den) = (0.0, 0.0);
    for k in 0..x.len() {
        p[k] = x[k] + h;
        let up = f(&p);
        p[k] = x[k] - h;
        let dn = f(&p);
        p[k] = x[k];
        let fd = (up - dn) / (2.0 * h);
        num += (fd - grad[k]).powi(2);
        den += fd * fd;
    }
    (num / den.max(f64::MIN_POSITIVE)).sqrt()
}
