//! Coarse-to-fine minimization of the predictor loss.

use super::losses::{evaluate, pack, total_weights, unpack, Crop};
use super::{FlowPair, PredictorConfig};
use crate::error::{Error, Result};
use crate::fields::{check_min_dims, ScalarField2D, VectorField2D};
use crate::optim::Adam;
use crate::warp::{sample_bilinear, warp_gaussian, WarpConfig};

/// Smallest image edge accepted by the estimator.
pub const MIN_IMAGE_DIM: usize = 16;
/// Coarser levels are not built below this edge length.
const MIN_LEVEL_DIM: usize = 8;

/// Lowest total loss reached after every iteration, per pyramid level from
/// coarsest to finest. Entry 0 of each level is the starting loss.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub levels: Vec<Vec<f64>>,
}

/// Blurs with the binomial kernel [1, 4, 6, 4, 1] / 16 along both axes and
/// keeps every second sample.
pub fn downsample(f: &ScalarField2D) -> ScalarField2D {
    const TAPS: [f64; 5] = [0.0625, 0.25, 0.375, 0.25, 0.0625];
    let (h, w) = f.dims();
    let d = f.data();
    let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
    let row = ScalarField2D::from_fn(h, w, |x, y| {
        TAPS.iter().enumerate().map(|(k, t)| t * d[y * w + clamp(x as isize + k as isize - 2, w)]).sum()
    });
    let rd = row.data();
    ScalarField2D::from_fn(h.div_ceil(2), w.div_ceil(2), |x, y| {
        let (x, y) = (2 * x, 2 * y as isize);
        TAPS.iter().enumerate().map(|(k, t)| t * rd[clamp(y + k as isize - 2, h) * w + x]).sum()
    })
}

/// Bilinearly interpolates a coarse flow onto an `h x w` grid twice as fine
/// and doubles its values.
pub fn upsample_flow(flow: &VectorField2D, h: usize, w: usize) -> VectorField2D {
    let (hc, wc) = flow.dims();
    VectorField2D::from_fn(h, w, |x, y| {
        let (px, py) = (x as f64 / 2.0, y as f64 / 2.0);
        (
            2.0 * sample_bilinear(flow.u(), hc, wc, px, py),
            2.0 * sample_bilinear(flow.v(), hc, wc, px, py),
        )
    })
}

/// Estimates forward and backward flow between two images.
pub fn estimate_variational(i1: &ScalarField2D, i2: &ScalarField2D, cfg: &PredictorConfig) -> Result<FlowPair> {
    estimate_variational_traced(i1, i2, cfg, None).map(|(f, _)| f)
}

/// As [`estimate_variational`], optionally warm-started at full resolution,
/// also returning the loss trace.
pub fn estimate_variational_traced(
    i1: &ScalarField2D,
    i2: &ScalarField2D,
    cfg: &PredictorConfig,
    init: Option<&FlowPair>,
) -> Result<(FlowPair, Trace)> {
    cfg.validate()?;
    i1.ensure_same_dims(i2.dims())?;
    let (h, w) = i1.dims();
    check_min_dims(h, w, MIN_IMAGE_DIM)?;
    if !i1.is_finite() || !i2.is_finite() {
        return Err(Error::NonFinite("input image".into()));
    }

    let mut pyramid = vec![(presmooth(i1, cfg.presmooth)?, presmooth(i2, cfg.presmooth)?)];
    while pyramid.len() < cfg.levels {
        let (a, b) = pyramid.last().expect("non-empty");
        let (a, b) = (downsample(a), downsample(b));
        if a.height().min(a.width()) < MIN_LEVEL_DIM.max(2 * cfg.ring + 1) {
            break;
        }
        pyramid.push((a, b));
    }

    let mut trace = Trace::default();
    let mut flows: Option<FlowPair> = None;
    if let Some(f) = init {
        f.forward.ensure_same_dims((h, w))?;
        f.backward.ensure_same_dims((h, w))?;
        pyramid.truncate(1);
        flows = Some(f.clone());
    }
    for (level, (a, b)) in pyramid.iter().enumerate().rev() {
        let (lh, lw) = a.dims();
        let start = match flows.take() {
            None => FlowPair::zeros(lh, lw),
            Some(f) if f.dims() == (lh, lw) => f,
            Some(f) => FlowPair {
                forward: upsample_flow(&f.forward, lh, lw),
                backward: upsample_flow(&f.backward, lh, lw),
            },
        };
        let (f, history) = optimize_level(a, b, &start, cfg, level)?;
        trace.levels.push(history);
        flows = Some(f);
    }
    Ok((flows.expect("at least one level"), trace))
}

fn presmooth(f: &ScalarField2D, sigma: f64) -> Result<ScalarField2D> {
    if sigma == 0.0 {
        return Ok(f.clone());
    }
    let (h, w) = f.dims();
    warp_gaussian(f, &VectorField2D::zeros(h, w), &WarpConfig::new(sigma * sigma / 2.0, 1.0))
}

/// Plain adaptive-moment descent; the iterate with the lowest loss is kept.
fn optimize_level(
    i1: &ScalarField2D,
    i2: &ScalarField2D,
    start: &FlowPair,
    cfg: &PredictorConfig,
    level: usize,
) -> Result<(FlowPair, Vec<f64>)> {
    let (h, w) = i1.dims();
    let crop = Crop::new(h, w, cfg.ring)?;
    let weights = total_weights(cfg);
    let mut params = pack(start);
    let mut grad = vec![0.0; params.len()];
    let mut current = evaluate(&crop, i1.data(), i2.data(), &params, cfg, weights, Some(&mut grad)).total;
    let check = |loss: f64, it: usize| {
        if loss.is_finite() {
            Ok(())
        } else {
            Err(Error::NonFinite(format!(
                "predictor loss at pyramid level {level}, iteration {it}"
            )))
        }
    };
    check(current, 0)?;
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    history.push(current);
    let mut best = params.clone();
    let mut adam = Adam::new(params.len(), cfg.step, cfg.betas);
    for it in 1..=cfg.iterations {
        adam.update(&mut params, &grad, cfg.step);
        grad.iter_mut().for_each(|g| *g = 0.0);
        let loss = evaluate(&crop, i1.data(), i2.data(), &params, cfg, weights, Some(&mut grad)).total;
        check(loss, it)?;
        if loss < current {
            current = loss;
            best.copy_from_slice(&params);
        }
        history.push(current);
    }
    let params = best;
    let mut flows = unpack(h, w, &params);
    fill_ring(&mut flows.forward);
    fill_ring(&mut flows.backward);
    Ok((flows, history))
}

/// Outermost nodes never enter any loss term; give them their inner
/// neighbour's value.
fn fill_ring(f: &mut VectorField2D) {
    let (h, w) = f.dims();
    for y in 0..h {
        for x in 0..w {
            if x == 0 || y == 0 || x == w - 1 || y == h - 1 {
                let v = f.get(x.clamp(1, w - 2), y.clamp(1, h - 2));
                f.set(x, y, v);
            }
        }
    }
}
