//! Predictor losses and their analytic gradients.
//!
//! Every term is a mean over the interior crop that excludes a ring of
//! `cfg.ring` nodes. Flow parameters are packed as four planes
//! `[forward.u, forward.v, backward.u, backward.v]`.

use super::{Charbonnier, FlowPair, PredictorConfig};
use crate::error::{Error, Result};
use crate::fields::{check_min_dims, diff_weights, ScalarField2D, VectorField2D};
use crate::warp::sample_bilinear_grad;

/// Values of the individual loss terms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossTerms {
    pub data: f64,
    pub smoothness: f64,
    pub divergence: f64,
    pub total: f64,
}

/// Interior crop of an `h x w` grid.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Crop {
    pub h: usize,
    pub w: usize,
    pub ring: usize,
}

impl Crop {
    pub fn new(h: usize, w: usize, ring: usize) -> Result<Self> {
        check_min_dims(h, w, (2 * ring + 1).max(3))?;
        Ok(Self { h, w, ring })
    }

    pub fn count(&self) -> usize {
        (self.h - 2 * self.ring) * (self.w - 2 * self.ring)
    }

    pub fn nodes(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        let (r, w) = (self.ring, self.w);
        (r..self.h - r).flat_map(move |y| (r..w - r).map(move |x| (x, y, y * w + x)))
    }

    /// The two stencil taps of d/dx (`axis == 0`) or d/dy at a node.
    #[inline]
    pub fn taps(&self, x: usize, y: usize, axis: usize) -> [(usize, f64); 2] {
        if axis == 0 {
            diff_weights(self.w, x).map(|(i, c)| (y * self.w + i, c))
        } else {
            diff_weights(self.h, y).map(|(j, c)| (j * self.w + x, c))
        }
    }
}

/// Mean of `pen(a(x) - b(x + w(x)))`; accumulates `scale` times its
/// gradient with respect to the flow into `grad`.
pub(crate) fn data_term(
    crop: &Crop,
    a: &[f64],
    b: &[f64],
    u: &[f64],
    v: &[f64],
    pen: &Charbonnier,
    grad: Option<(&mut [f64], &mut [f64], f64)>,
) -> f64 {
    let n = crop.count() as f64;
    let mut sum = 0.0;
    match grad {
        None => {
            for (x, y, i) in crop.nodes() {
                let s = crate::warp::sample_bilinear(b, crop.h, crop.w, x as f64 + u[i], y as f64 + v[i]);
                sum += pen.eval(a[i] - s);
            }
        }
        Some((gu, gv, scale)) => {
            let k = scale / n;
            for (x, y, i) in crop.nodes() {
                let (s, sx, sy) = sample_bilinear_grad(b, crop.h, crop.w, x as f64 + u[i], y as f64 + v[i]);
                let (p, dp) = pen.eval_deriv(a[i] - s);
                sum += p;
                let d = dp * k;
                gu[i] -= d * sx;
                gv[i] -= d * sy;
            }
        }
    }
    sum / n
}

/// Mean over the crop of the penalized four first derivatives of a flow.
pub(crate) fn smooth_term(
    crop: &Crop,
    u: &[f64],
    v: &[f64],
    pen: &Charbonnier,
    mut grad: Option<(&mut [f64], &mut [f64], f64)>,
) -> f64 {
    let n = crop.count() as f64;
    let mut sum = 0.0;
    for (x, y, _) in crop.nodes() {
        for axis in 0..2 {
            for plane in 0..2 {
                let p = if plane == 0 { u } else { v };
                let taps = crop.taps(x, y, axis);
                let d: f64 = taps.iter().map(|&(i, c)| c * p[i]).sum();
                if let Some((gu, gv, scale)) = grad.as_mut() {
                    let (p, dp) = pen.eval_deriv(d);
                    sum += p;
                    let g = if plane == 0 { &mut **gu } else { &mut **gv };
                    let k = dp * *scale / n;
                    for &(i, c) in &taps {
                        g[i] += k * c;
                    }
                } else {
                    sum += pen.eval(d);
                }
            }
        }
    }
    sum / n
}

/// Mean over the crop of the penalized divergence.
pub(crate) fn div_term(
    crop: &Crop,
    u: &[f64],
    v: &[f64],
    pen: &Charbonnier,
    mut grad: Option<(&mut [f64], &mut [f64], f64)>,
) -> f64 {
    let n = crop.count() as f64;
    let mut sum = 0.0;
    for (x, y, _) in crop.nodes() {
        let tx = crop.taps(x, y, 0);
        let ty = crop.taps(x, y, 1);
        let d: f64 = tx.iter().map(|&(i, c)| c * u[i]).sum::<f64>() + ty.iter().map(|&(i, c)| c * v[i]).sum::<f64>();
        if let Some((gu, gv, scale)) = grad.as_mut() {
            let (p, dp) = pen.eval_deriv(d);
            sum += p;
            let k = dp * *scale / n;
            for &(i, c) in &tx {
                gu[i] += k * c;
            }
            for &(i, c) in &ty {
                gv[i] += k * c;
            }
        } else {
            sum += pen.eval(d);
        }
    }
    sum / n
}

/// Weights applied to the three terms when forming a gradient.
#[derive(Clone, Copy)]
pub(crate) struct Weights {
    pub data: f64,
    pub smooth: f64,
    pub div: f64,
}

/// Evaluates every term on packed flow parameters and accumulates the
/// weighted gradient into `grad` when given.
pub(crate) fn evaluate(
    crop: &Crop,
    i1: &[f64],
    i2: &[f64],
    params: &[f64],
    cfg: &PredictorConfig,
    weights: Weights,
    grad: Option<&mut [f64]>,
) -> LossTerms {
    let n = crop.h * crop.w;
    let (fu, rest) = params.split_at(n);
    let (fv, rest) = rest.split_at(n);
    let (bu, bv) = rest.split_at(n);
    let pen = &cfg.penalty;
    let (data, smooth, div) = match grad {
        None => (
            data_term(crop, i1, i2, fu, fv, pen, None) + data_term(crop, i2, i1, bu, bv, pen, None),
            0.5 * (smooth_term(crop, fu, fv, pen, None) + smooth_term(crop, bu, bv, pen, None)),
            div_term(crop, fu, fv, pen, None) + div_term(crop, bu, bv, pen, None),
        ),
        Some(g) => {
            let (gfu, rest) = g.split_at_mut(n);
            let (gfv, rest) = rest.split_at_mut(n);
            let (gbu, gbv) = rest.split_at_mut(n);
            let d = data_term(crop, i1, i2, fu, fv, pen, Some((&mut *gfu, &mut *gfv, weights.data)))
                + data_term(crop, i2, i1, bu, bv, pen, Some((&mut *gbu, &mut *gbv, weights.data)));
            let hs = 0.5 * weights.smooth;
            let s = 0.5
                * (smooth_term(crop, fu, fv, pen, Some((&mut *gfu, &mut *gfv, hs)))
                    + smooth_term(crop, bu, bv, pen, Some((&mut *gbu, &mut *gbv, hs))));
            let v = div_term(crop, fu, fv, pen, Some((&mut *gfu, &mut *gfv, weights.div)))
                + div_term(crop, bu, bv, pen, Some((&mut *gbu, &mut *gbv, weights.div)));
            (d, s, v)
        }
    };
    LossTerms {
        data,
        smoothness: smooth,
        divergence: div,
        total: data + cfg.lambda_s * smooth + cfg.lambda_d * div,
    }
}

pub(crate) fn pack(flows: &FlowPair) -> Vec<f64> {
    [flows.forward.u(), flows.forward.v(), flows.backward.u(), flows.backward.v()].concat()
}

pub(crate) fn unpack(h: usize, w: usize, p: &[f64]) -> FlowPair {
    let n = h * w;
    let field = |a: &[f64], b: &[f64]| VectorField2D::from_vecs(h, w, a.to_vec(), b.to_vec()).expect("sized");
    FlowPair {
        forward: field(&p[..n], &p[n..2 * n]),
        backward: field(&p[2 * n..3 * n], &p[3 * n..]),
    }
}

fn setup(i1: Option<(&ScalarField2D, &ScalarField2D)>, flows: &FlowPair, cfg: &PredictorConfig) -> Result<Crop> {
    cfg.penalty.validate()?;
    flows.validate()?;
    let (h, w) = flows.dims();
    if let Some((a, b)) = i1 {
        a.ensure_same_dims((h, w))?;
        b.ensure_same_dims((h, w))?;
    }
    Crop::new(h, w, cfg.ring)
}

const DATA_ONLY: Weights = Weights {
    data: 1.0,
    smooth: 0.0,
    div: 0.0,
};

/// Bidirectional photometric penalty.
pub fn photometric_loss(i1: &ScalarField2D, i2: &ScalarField2D, flows: &FlowPair, cfg: &PredictorConfig) -> Result<f64> {
    let crop = setup(Some((i1, i2)), flows, cfg)?;
    Ok(evaluate(&crop, i1.data(), i2.data(), &pack(flows), cfg, DATA_ONLY, None).data)
}

/// Photometric penalty and its gradient with respect to both flows.
pub fn photometric_loss_grad(
    i1: &ScalarField2D,
    i2: &ScalarField2D,
    flows: &FlowPair,
    cfg: &PredictorConfig,
) -> Result<(f64, FlowPair)> {
    let crop = setup(Some((i1, i2)), flows, cfg)?;
    let p = pack(flows);
    let mut g = vec![0.0; p.len()];
    let t = evaluate(&crop, i1.data(), i2.data(), &p, cfg, DATA_ONLY, Some(&mut g));
    Ok((t.data, unpack(crop.h, crop.w, &g)))
}

/// `(smoothness, divergence)` penalties of both flows.
pub fn regularizer_loss(flows: &FlowPair, cfg: &PredictorConfig) -> Result<(f64, f64)> {
    let crop = setup(None, flows, cfg)?;
    let (h, w) = flows.dims();
    let zero = vec![0.0; h * w];
    let t = evaluate(&crop, &zero, &zero, &pack(flows), cfg, DATA_ONLY, None);
    Ok((t.smoothness, t.divergence))
}

/// Both regularizers with their gradients.
pub fn regularizer_loss_grad(flows: &FlowPair, cfg: &PredictorConfig) -> Result<((f64, FlowPair), (f64, FlowPair))> {
    let crop = setup(None, flows, cfg)?;
    let (h, w) = flows.dims();
    let zero = vec![0.0; h * w];
    let p = pack(flows);
    let mut gs = vec![0.0; p.len()];
    let mut gd = vec![0.0; p.len()];
    let only = |s, d| Weights {
        data: 0.0,
        smooth: s,
        div: d,
    };
    let t = evaluate(&crop, &zero, &zero, &p, cfg, only(1.0, 0.0), Some(&mut gs));
    evaluate(&crop, &zero, &zero, &p, cfg, only(0.0, 1.0), Some(&mut gd));
    Ok((
        (t.smoothness, unpack(h, w, &gs)),
        (t.divergence, unpack(h, w, &gd)),
    ))
}

/// `L_d + lambda_s L_s + lambda_d L_div`.
pub fn total_predictor_loss(i1: &ScalarField2D, i2: &ScalarField2D, flows: &FlowPair, cfg: &PredictorConfig) -> Result<f64> {
    let crop = setup(Some((i1, i2)), flows, cfg)?;
    Ok(evaluate(&crop, i1.data(), i2.data(), &pack(flows), cfg, DATA_ONLY, None).total)
}

/// Total loss and its gradient.
pub fn total_predictor_loss_grad(
    i1: &ScalarField2D,
    i2: &ScalarField2D,
    flows: &FlowPair,
    cfg: &PredictorConfig,
) -> Result<(f64, FlowPair)> {
    let crop = setup(Some((i1, i2)), flows, cfg)?;
    let p = pack(flows);
    let mut g = vec![0.0; p.len()];
    let t = evaluate(&crop, i1.data(), i2.data(), &p, cfg, total_weights(cfg), Some(&mut g));
    if !t.total.is_finite() {
        return Err(Error::NonFinite("predictor loss".into()));
    }
    Ok((t.total, unpack(crop.h, crop.w, &g)))
}

pub(crate) fn total_weights(cfg: &PredictorConfig) -> Weights {
    Weights {
        data: 1.0,
        smooth: cfg.lambda_s,
        div: cfg.lambda_d,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> PredictorConfig {
        PredictorConfig::default()
    }

    fn image(h: usize, w: usize, shift: f64) -> ScalarField2D {
        ScalarField2D::from_fn(h, w, |x, y| {
            let xf = x as f64 - shift;
            0.5 + 0.25 * (0.7 * xf).sin() * (0.5 * y as f64).cos() + 0.2 * (0.31 * xf + 0.4 * y as f64).sin()
        })
    }

    fn pair(h: usize, w: usize, f: (f64, f64), b: (f64, f64)) -> FlowPair {
        FlowPair {
            forward: VectorField2D::constant(h, w, f),
            backward: VectorField2D::constant(h, w, b),
        }
    }

    #[test]
    fn identical_images_cost_twice_the_floor() {
        let s0 = cfg().penalty.eval(0.0);
        let i = image(10, 12, 0.0);
        let l = photometric_loss(&i, &i, &FlowPair::zeros(10, 12), &cfg()).unwrap();
        assert!((l - 2.0 * s0).abs() < 1e-15);
        assert!((2.0 * s0 - 3.99e-3).abs() < 1e-5);
    }

    #[test]
    fn true_shift_realigns_exactly() {
        let (i1, i2) = (image(12, 14, 0.0), image(12, 14, 1.0));
        let s0 = cfg().penalty.eval(0.0);
        let gt = photometric_loss(&i1, &i2, &pair(12, 14, (1.0, 0.0), (-1.0, 0.0)), &cfg()).unwrap();
        let zero = photometric_loss(&i1, &i2, &FlowPair::zeros(12, 14), &cfg()).unwrap();
        assert!((gt - 2.0 * s0).abs() < 1e-6);
        assert!(zero > gt);
    }

    #[test]
    fn regularizer_examples() {
        let s = cfg().penalty;
        let (sm, dv) = regularizer_loss(&pair(8, 8, (1.0, 2.0), (-3.0, 0.5)), &cfg()).unwrap();
        assert!((sm - 4.0 * s.eval(0.0)).abs() < 1e-15);
        assert!((dv - 2.0 * s.eval(0.0)).abs() < 1e-15);

        let radial = VectorField2D::from_fn(9, 9, |x, y| (x as f64, y as f64));
        let flows = FlowPair {
            forward: radial.clone(),
            backward: radial,
        };
        let (_, dv) = regularizer_loss(&flows, &cfg()).unwrap();
        assert!((dv - 2.0 * s.eval(2.0)).abs() < 1e-14);

        let rot = VectorField2D::from_fn(9, 9, |x, y| (-(y as f64), x as f64));
        let flows = FlowPair {
            forward: rot.clone(),
            backward: rot,
        };
        let (sm, dv) = regularizer_loss(&flows, &cfg()).unwrap();
        assert!((dv - 2.0 * s.eval(0.0)).abs() < 1e-15);
        assert!(sm > 4.0 * s.eval(0.0));
    }

    #[test]
    fn total_loss_assembly() {
        let z = ScalarField2D::zeros(8, 8);
        let flows = FlowPair::zeros(8, 8);
        let c = cfg();
        let s0 = c.penalty.eval(0.0);
        let t = total_predictor_loss(&z, &z, &flows, &c).unwrap();
        assert!((t - (1.0 + 2.0 * c.lambda_s + c.lambda_d) * 2.0 * s0).abs() < 1e-15);
        let c0 = PredictorConfig {
            lambda_s: 0.0,
            lambda_d: 0.0,
            ..cfg()
        };
        let (i1, i2) = (image(8, 8, 0.0), image(8, 8, 0.4));
        let f = pair(8, 8, (0.3, 0.1), (-0.2, 0.05));
        assert_eq!(
            total_predictor_loss(&i1, &i2, &f, &c0).unwrap(),
            photometric_loss(&i1, &i2, &f, &c0).unwrap()
        );
    }

    #[test]
    fn rejects_mismatched_inputs() {
        let i = image(8, 8, 0.0);
        let j = image(8, 9, 0.0);
        assert!(photometric_loss(&i, &j, &FlowPair::zeros(8, 8), &cfg()).is_err());
        let bad = FlowPair {
            forward: VectorField2D::zeros(8, 8),
            backward: VectorField2D::zeros(9, 8),
        };
        assert!(regularizer_loss(&bad, &cfg()).is_err());
        assert!(photometric_loss(&image(4, 4, 0.0), &image(4, 4, 0.0), &FlowPair::zeros(4, 4), &cfg()).is_err());
    }
}
