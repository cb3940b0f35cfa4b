//! Flow accuracy metrics and diagnostics.
//!
//! Angular error uses the augmented-vector convention: the angle between
//! `(u, v, 1)` and `(u_gt, v_gt, 1)`.

use crate::error::{Error, Result};
use crate::fields::{divergence, ScalarField2D, VectorField2D};
use crate::warp::{sample_bilinear, warp_bilinear, Direction};

/// Mean end-point error. With `normalize`, scaled to pixels per 100 pixels
/// of image width.
pub fn aepe(est: &VectorField2D, gt: &VectorField2D, normalize: bool) -> Result<f64> {
    est.ensure_same_dims(gt.dims())?;
    let e = mean(epe_values(est, gt));
    Ok(if normalize { e * 100.0 / est.width() as f64 } else { e })
}

/// Mean of `|u_f(x) + u_b(x + u_f(x))|` over nodes whose forward target
/// stays on the grid. Zero for exactly inverse flows.
pub fn fb_consistency(forward: &VectorField2D, backward: &VectorField2D) -> Result<f64> {
    forward.ensure_same_dims(backward.dims())?;
    let (h, w) = forward.dims();
    let (mut sum, mut n) = (0.0, 0usize);
    for y in 0..h {
        for x in 0..w {
            let (u, v) = forward.get(x, y);
            let (px, py) = (x as f64 + u, y as f64 + v);
            if px < 0.0 || py < 0.0 || px > (w - 1) as f64 || py > (h - 1) as f64 {
                continue;
            }
            let bu = sample_bilinear(backward.u(), h, w, px, py);
            let bv = sample_bilinear(backward.v(), h, w, px, py);
            sum += (u + bu).hypot(v + bv);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidParameter("every forward vector leaves the grid".into()));
    }
    Ok(sum / n as f64)
}

/// Per-pixel end-point errors, row-major.
pub fn epe_map(est: &VectorField2D, gt: &VectorField2D) -> Result<ScalarField2D> {
    est.ensure_same_dims(gt.dims())?;
    let (h, w) = est.dims();
    ScalarField2D::from_vec(h, w, epe_values(est, gt).collect())
}

fn epe_values<'a>(est: &'a VectorField2D, gt: &'a VectorField2D) -> impl Iterator<Item = f64> + 'a {
    let (eu, ev, gu, gv) = (est.u(), est.v(), gt.u(), gt.v());
    (0..eu.len()).map(move |i| (eu[i] - gu[i]).hypot(ev[i] - gv[i]))
}

fn mean(it: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = it.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    if n == 0 { 0.0 } else { s / n as f64 }
}

/// Mean angular error in degrees, computed as `atan2(|a x b|, a . b)` so
/// that equal vectors give exactly zero.
pub fn aae(est: &VectorField2D, gt: &VectorField2D) -> Result<f64> {
    est.ensure_same_dims(gt.dims())?;
    let (eu, ev, gu, gv) = (est.u(), est.v(), gt.u(), gt.v());
    Ok(mean((0..eu.len()).map(|i| {
        let dot = eu[i] * gu[i] + ev[i] * gv[i] + 1.0;
        let (cx, cy, cz) = (ev[i] - gv[i], gu[i] - eu[i], eu[i] * gv[i] - ev[i] * gu[i]);
        (cx * cx + cy * cy + cz * cz).sqrt().atan2(dot).to_degrees()
    })))
}

/// Mean and maximum of `|div u|` over nodes off the outer ring.
pub fn divergence_stats(u: &VectorField2D) -> Result<(f64, f64)> {
    let d = divergence(u)?;
    let (h, w) = d.dims();
    let vals = (1..h - 1).flat_map(|y| (1..w - 1).map(move |x| (x, y))).map(|(x, y)| d.get(x, y).abs());
    let (s, m, n) = vals.fold((0.0, 0.0f64, 0usize), |(s, m, n), a| (s + a, m.max(a), n + 1));
    Ok((s / n as f64, m))
}

/// Fixed-edge histogram of each displacement component.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub u: Vec<u64>,
    pub v: Vec<u64>,
}

impl Histogram {
    pub fn bins(&self) -> usize {
        self.u.len()
    }

    /// Lower and upper edge of bin `k`.
    pub fn edges(&self, k: usize) -> (f64, f64) {
        let step = (self.hi - self.lo) / self.bins() as f64;
        (self.lo + k as f64 * step, self.lo + (k + 1) as f64 * step)
    }

    /// Bin of `x`; values outside the range go to the nearest end bin.
    pub fn bin_of(&self, x: f64) -> usize {
        bin_index(x, self.lo, self.hi, self.bins())
    }
}

fn bin_index(x: f64, lo: f64, hi: f64, bins: usize) -> usize {
    let t = (x - lo) / (hi - lo) * bins as f64;
    if t.is_nan() {
        return 0;
    }
    (t.floor().max(0.0) as usize).min(bins - 1)
}

/// Counts of `u` and `v` samples in `bins` equal bins over `[lo, hi)`.
/// Out-of-range samples are clamped into the end bins so every pixel is
/// counted once per component.
pub fn displacement_histogram(u: &VectorField2D, bins: usize, range: (f64, f64)) -> Result<Histogram> {
    let (lo, hi) = range;
    if bins == 0 {
        return Err(Error::InvalidParameter("histogram needs at least one bin".into()));
    }
    if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidParameter(format!("empty histogram range [{lo}, {hi})")));
    }
    let count = |data: &[f64]| {
        let mut c = vec![0u64; bins];
        for &x in data {
            c[bin_index(x, lo, hi, bins)] += 1;
        }
        c
    };
    Ok(Histogram {
        lo,
        hi,
        u: count(u.u()),
        v: count(u.v()),
    })
}

/// Per-row mean of `(u, v)` at column `x` across frames.
pub fn wake_profile(frames: &[VectorField2D], x: usize) -> Result<Vec<(f64, f64)>> {
    let first = frames
        .first()
        .ok_or_else(|| Error::InvalidParameter("wake profile needs at least one frame".into()))?;
    let (h, w) = first.dims();
    if x >= w {
        return Err(Error::InvalidParameter(format!("column {x} outside width {w}")));
    }
    let mut acc = vec![(0.0, 0.0); h];
    for f in frames {
        f.ensure_same_dims((h, w))?;
        for (y, a) in acc.iter_mut().enumerate() {
            let (u, v) = f.get(x, y);
            a.0 += u;
            a.1 += v;
        }
    }
    let n = frames.len() as f64;
    Ok(acc.into_iter().map(|(u, v)| (u / n, v / n)).collect())
}

/// Number of sign changes in a sequence, ignoring exact zeros.
pub fn zero_crossings(values: &[f64]) -> usize {
    let signs: Vec<bool> = values.iter().filter(|v| **v != 0.0).map(|v| *v > 0.0).collect();
    signs.windows(2).filter(|p| p[0] != p[1]).count()
}

/// Border width excluded from the reconstruction residual.
pub const RECONSTRUCTION_RING: usize = 2;

/// Reconstructs the second image by sampling the first at `x - u` and
/// returns it with the mean absolute residual against `i2` off the border
/// ring.
pub fn reconstruction_residual(
    i1: &ScalarField2D,
    i2: &ScalarField2D,
    u: &VectorField2D,
) -> Result<(ScalarField2D, f64)> {
    i1.ensure_same_dims(i2.dims())?;
    u.ensure_same_dims(i1.dims())?;
    let rec = warp_bilinear(i1, u, Direction::Minus)?;
    let (h, w) = i1.dims();
    let r = RECONSTRUCTION_RING.min((h.min(w) - 1) / 2);
    let res = mean(
        (r..h - r)
            .flat_map(|y| (r..w - r).map(move |x| (x, y)))
            .map(|(x, y)| (rec.get(x, y) - i2.get(x, y)).abs()),
    );
    Ok((rec, res))
}

/// Per-frame metrics of a flow sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub frame: usize,
    pub aepe: f64,
    pub aae: f64,
    pub div_mean: f64,
    pub div_max: f64,
}

/// Metrics of every frame plus their means.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub frames: Vec<FrameMetrics>,
    pub normalized: bool,
}

impl MetricReport {
    pub fn mean_aepe(&self) -> f64 {
        mean(self.frames.iter().map(|f| f.aepe))
    }

    pub fn mean_aae(&self) -> f64 {
        mean(self.frames.iter().map(|f| f.aae))
    }

    pub fn max_divergence(&self) -> f64 {
        self.frames.iter().map(|f| f.div_max).fold(0.0, f64::max)
    }
}

/// Compares estimated and ground-truth sequences frame by frame.
pub fn evaluate_sequence(est: &[VectorField2D], gt: &[VectorField2D], normalize: bool) -> Result<MetricReport> {
    if est.len() != gt.len() {
        return Err(Error::DimensionMismatch {
            expected: (gt.len(), 1),
            found: (est.len(), 1),
        });
    }
    let frames = est
        .iter()
        .zip(gt)
        .enumerate()
        .map(|(frame, (e, g))| {
            let (div_mean, div_max) = divergence_stats(e)?;
            Ok(FrameMetrics {
                frame,
                aepe: aepe(e, g, normalize)?,
                aae: aae(e, g)?,
                div_mean,
                div_max,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MetricReport { frames, normalized: normalize })
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    let m = mean(values.iter().copied());
    let var = mean(values.iter().map(|v| (v - m).powi(2)));
    (m, var.sqrt())
}
