//! Quadratic Horn-Schunck baseline.

use crate::error::{Error, Result};
use crate::fields::{check_min_dims, diff_x, diff_y, ScalarField2D, VectorField2D};
use crate::warp::{warp_bilinear, Direction};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HsConfig {
    /// Smoothness weight; the energy uses `alpha^2`.
    pub alpha: f64,
    /// Sweeps per linearization.
    pub iterations: usize,
    /// Number of times the data term is re-linearized around the current flow.
    pub warps: usize,
}

impl Default for HsConfig {
    fn default() -> Self {
        Self {
            alpha: 0.1,
            iterations: 200,
            warps: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HsResult {
    pub flow: VectorField2D,
    /// Energy before and after every sweep, one list per linearization.
    pub energy: Vec<Vec<f64>>,
}

/// Linearized data term around a reference flow `u0`.
struct Linear {
    ix: Vec<f64>,
    iy: Vec<f64>,
    /// `I2(x + u0) - I1 - grad(I) . u0`
    c: Vec<f64>,
}

fn linearize(i1: &ScalarField2D, i2: &ScalarField2D, u0: &VectorField2D) -> Result<Linear> {
    let (h, w) = i1.dims();
    let i2w = warp_bilinear(i2, u0, Direction::Plus)?;
    let (ax, ay) = (diff_x(i1.data(), h, w), diff_y(i1.data(), h, w));
    let (bx, by) = (diff_x(i2w.data(), h, w), diff_y(i2w.data(), h, w));
    let n = h * w;
    let mut lin = Linear {
        ix: vec![0.0; n],
        iy: vec![0.0; n],
        c: vec![0.0; n],
    };
    for i in 0..n {
        lin.ix[i] = 0.5 * (ax[i] + bx[i]);
        lin.iy[i] = 0.5 * (ay[i] + by[i]);
        lin.c[i] = i2w.data()[i] - i1.data()[i] - lin.ix[i] * u0.u()[i] - lin.iy[i] * u0.v()[i];
    }
    Ok(lin)
}

fn energy(lin: &Linear, u: &[f64], v: &[f64], h: usize, w: usize, a2: f64) -> f64 {
    let mut e = 0.0;
    for i in 0..h * w {
        let r = lin.ix[i] * u[i] + lin.iy[i] * v[i] + lin.c[i];
        e += r * r;
    }
    let mut s = 0.0;
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            if x + 1 < w {
                s += (u[i + 1] - u[i]).powi(2) + (v[i + 1] - v[i]).powi(2);
            }
            if y + 1 < h {
                s += (u[i + w] - u[i]).powi(2) + (v[i + w] - v[i]).powi(2);
            }
        }
    }
    e + a2 * s
}

/// Horn-Schunck energy of `u`, with the data term linearized around `u0`.
pub fn hs_energy(i1: &ScalarField2D, i2: &ScalarField2D, u: &VectorField2D, u0: &VectorField2D, alpha: f64) -> Result<f64> {
    i1.ensure_same_dims(i2.dims())?;
    u.ensure_same_dims(i1.dims())?;
    u0.ensure_same_dims(i1.dims())?;
    let (h, w) = i1.dims();
    check_min_dims(h, w, 3)?;
    let lin = linearize(i1, i2, u0)?;
    Ok(energy(&lin, u.u(), u.v(), h, w, alpha * alpha))
}

/// Forward flow from `i1` to `i2` by Gauss-Seidel sweeps on the quadratic
/// energy, re-linearized `warps` times.
pub fn estimate_hs(i1: &ScalarField2D, i2: &ScalarField2D, cfg: &HsConfig) -> Result<HsResult> {
    i1.ensure_same_dims(i2.dims())?;
    let (h, w) = i1.dims();
    check_min_dims(h, w, 3)?;
    if !(cfg.alpha > 0.0) || cfg.warps == 0 {
        return Err(Error::InvalidParameter(format!(
            "Horn-Schunck needs alpha > 0 and at least one warp, got alpha = {}, warps = {}",
            cfg.alpha, cfg.warps
        )));
    }
    let a2 = cfg.alpha * cfg.alpha;
    let mut flow = VectorField2D::zeros(h, w);
    let mut history = Vec::with_capacity(cfg.warps);
    for _ in 0..cfg.warps {
        let lin = linearize(i1, i2, &flow)?;
        let (mut u, mut v) = (flow.u().to_vec(), flow.v().to_vec());
        let mut energies = vec![energy(&lin, &u, &v, h, w, a2)];
        for _ in 0..cfg.iterations {
            for y in 0..h {
                for x in 0..w {
                    let i = y * w + x;
                    let (mut su, mut sv, mut np) = (0.0, 0.0, 0.0);
                    for (ok, j) in [
                        (x > 0, i.wrapping_sub(1)),
                        (x + 1 < w, i + 1),
                        (y > 0, i.wrapping_sub(w)),
                        (y + 1 < h, i + w),
                    ] {
                        if ok {
                            su += u[j];
                            sv += v[j];
                            np += 1.0;
                        }
                    }
                    let (ub, vb) = (su / np, sv / np);
                    let (ix, iy) = (lin.ix[i], lin.iy[i]);
                    let t = (ix * ub + iy * vb + lin.c[i]) / (a2 * np + ix * ix + iy * iy);
                    u[i] = ub - ix * t;
                    v[i] = vb - iy * t;
                }
            }
            energies.push(energy(&lin, &u, &v, h, w, a2));
        }
        flow = VectorField2D::from_vecs(h, w, u, v)?;
        if !flow.is_finite() {
            return Err(Error::NonFinite("Horn-Schunck flow".into()));
        }
        history.push(energies);
    }
    Ok(HsResult { flow, energy: history })
}
