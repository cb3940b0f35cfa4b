//! Physical corrector: blends the optical estimate with an
//! advection-diffusion forecast of the previous velocity, adds a learned
//! linear differential residual, and is trained without ground truth
//! through vorticity transport consistency.

use crate::error::{Error, Result};
use crate::fields::{curl, partial_derivative, ScalarField2D, VectorField2D};
use crate::optim::Adam;
use crate::predict::{Charbonnier, Crop};
use crate::sim::{advect_diffuse, step_vorticity};

/// Per-component sigmoid gate fed by two 2-in/2-out correlation stencils.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams {
    /// Odd stencil edge length.
    pub size: usize,
    /// Stencils applied to the optical estimate, indexed
    /// `[(out * 2 + in) * size * size + dy * size + dx]`.
    pub we: Vec<f64>,
    /// Stencils applied to the tentative velocity, same layout.
    pub wp: Vec<f64>,
    pub bias: [f64; 2],
}

impl GateParams {
    pub fn zeros(size: usize) -> Self {
        Self {
            size,
            we: vec![0.0; 4 * size * size],
            wp: vec![0.0; 4 * size * size],
            bias: [0.0; 2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size % 2 == 0 {
            return Err(Error::InvalidParameter(format!(
                "gate stencil size must be odd, got {}",
                self.size
            )));
        }
        let n = 4 * self.size * self.size;
        if self.we.len() != n || self.wp.len() != n {
            return Err(Error::InvalidParameter(format!(
                "gate stencils need {n} weights each, got {} and {}",
                self.we.len(),
                self.wp.len()
            )));
        }
        if self.we.iter().chain(&self.wp).chain(&self.bias).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gate parameters".into()));
        }
        Ok(())
    }
}

/// Coefficients of the residual operator `sum c_ij d^(i+j)/dx^i dy^j` over
/// `i + j < order`, one set per velocity component.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaParams {
    pub order: usize,
    /// Coefficients for the `u` output in [`GammaParams::indices`] order.
    pub cx: Vec<f64>,
    /// Coefficients for the `v` output.
    pub cy: Vec<f64>,
}

impl GammaParams {
    pub fn zeros(order: usize) -> Self {
        let n = Self::count(order);
        Self {
            order,
            cx: vec![0.0; n],
            cy: vec![0.0; n],
        }
    }

    /// Number of coefficients per component, `q (q + 1) / 2`.
    pub fn count(order: usize) -> usize {
        order * (order + 1) / 2
    }

    /// Derivative orders `(i, j)` by increasing total order, x-heavy first:
    /// (0,0), (1,0), (0,1), (2,0), (1,1), (0,2), ...
    pub fn indices(order: usize) -> Vec<(usize, usize)> {
        (0..order).flat_map(|s| (0..=s).rev().map(move |i| (i, s - i))).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.order == 0 {
            return Err(Error::InvalidParameter("residual operator order must be at least 1".into()));
        }
        if self.order > crate::fields::MAX_DERIVATIVE_ORDER + 1 {
            return Err(Error::OrderTooHigh {
                order: self.order - 1,
                max: crate::fields::MAX_DERIVATIVE_ORDER,
            });
        }
        let n = Self::count(self.order);
        if self.cx.len() != n || self.cy.len() != n {
            return Err(Error::InvalidParameter(format!(
                "order {} needs {n} coefficients per component, got {} and {}",
                self.order,
                self.cx.len(),
                self.cy.len()
            )));
        }
        if self.cx.iter().chain(&self.cy).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("residual operator coefficients".into()));
        }
        Ok(())
    }
}

/// Everything the corrector needs for one step.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrectorParams {
    pub gate: GateParams,
    pub gamma: GammaParams,
    pub nu: f64,
    pub dt: f64,
}

impl CorrectorParams {
    pub const DEFAULT_ORDER: usize = 3;
    pub const DEFAULT_GATE_SIZE: usize = 3;

    /// Untrained corrector: gate 0.5 everywhere, no residual.
    pub fn new(nu: f64, dt: f64) -> Self {
        Self {
            gate: GateParams::zeros(Self::DEFAULT_GATE_SIZE),
            gamma: GammaParams::zeros(Self::DEFAULT_ORDER),
            nu,
            dt,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.gate.validate()?;
        self.gamma.validate()?;
        if !(self.nu >= 0.0) || !(self.dt > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "corrector needs nu >= 0 and dt > 0, got nu = {}, dt = {}",
                self.nu, self.dt
            )));
        }
        Ok(())
    }

    /// Trainable values flattened as `[we, wp, bias, cx, cy]`.
    pub fn to_vec(&self) -> Vec<f64> {
        [
            &self.gate.we[..],
            &self.gate.wp[..],
            &self.gate.bias[..],
            &self.gamma.cx[..],
            &self.gamma.cy[..],
        ]
        .concat()
    }

    /// Inverse of [`CorrectorParams::to_vec`] for the same shapes.
    pub fn set_from_slice(&mut self, p: &[f64]) {
        let nw = self.gate.we.len();
        let ng = self.gamma.cx.len();
        assert_eq!(p.len(), 2 * nw + 2 + 2 * ng, "parameter vector length");
        self.gate.we.copy_from_slice(&p[..nw]);
        self.gate.wp.copy_from_slice(&p[nw..2 * nw]);
        self.gate.bias.copy_from_slice(&p[2 * nw..2 * nw + 2]);
        self.gamma.cx.copy_from_slice(&p[2 * nw + 2..2 * nw + 2 + ng]);
        self.gamma.cy.copy_from_slice(&p[2 * nw + 2 + ng..]);
    }
}

/// Logit bound keeping the gain strictly inside (0, 1) in double precision.
const MAX_LOGIT: f64 = 30.0;

#[inline]
fn sigmoid(z: f64) -> f64 {
    let z = z.clamp(-MAX_LOGIT, MAX_LOGIT);
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Stencil sample offsets with clamped indices; calls `f(tap, index)`.
#[inline]
fn for_each_tap(x: usize, y: usize, h: usize, w: usize, size: usize, mut f: impl FnMut(usize, usize)) {
    let r = (size / 2) as isize;
    for dy in 0..size {
        let yy = (y as isize + dy as isize - r).clamp(0, h as isize - 1) as usize;
        for dx in 0..size {
            let xx = (x as isize + dx as isize - r).clamp(0, w as isize - 1) as usize;
            f(dy * size + dx, yy * w + xx);
        }
    }
}

fn gate_logits(est: &VectorField2D, tent: &VectorField2D, g: &GateParams) -> [Vec<f64>; 2] {
    let (h, w) = est.dims();
    let k2 = g.size * g.size;
    let mut z = [vec![g.bias[0]; h * w], vec![g.bias[1]; h * w]];
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            for (out, zc) in z.iter_mut().enumerate() {
                let mut acc = 0.0;
                for inp in 0..2 {
                    let base = (out * 2 + inp) * k2;
                    let (e, t) = (est.component(inp), tent.component(inp));
                    for_each_tap(x, y, h, w, g.size, |tap, j| {
                        acc += g.we[base + tap] * e[j] + g.wp[base + tap] * t[j];
                    });
                }
                zc[i] += acc;
            }
        }
    }
    z
}

/// Gain `K = sigmoid(b + W_e * est + W_p * tent)` per component, with
/// clamped borders.
pub fn gate(est: &VectorField2D, tent: &VectorField2D, params: &GateParams) -> Result<VectorField2D> {
    est.ensure_same_dims(tent.dims())?;
    params.validate()?;
    let (h, w) = est.dims();
    let [zu, zv] = gate_logits(est, tent, params);
    VectorField2D::from_vecs(h, w, zu.into_iter().map(sigmoid).collect(), zv.into_iter().map(sigmoid).collect())
}

/// Derivatives of `est - prev` for each coefficient index, per component.
fn gamma_basis(est: &VectorField2D, prev: &VectorField2D, order: usize) -> Result<Vec<[ScalarField2D; 2]>> {
    let psi = est.sub(prev);
    let (pu, pv) = (psi.u_field(), psi.v_field());
    GammaParams::indices(order)
        .into_iter()
        .map(|(i, j)| Ok([partial_derivative(&pu, i, j)?, partial_derivative(&pv, i, j)?]))
        .collect()
}

/// `Phi = Gamma(est - prev)` applied per component.
pub fn gamma_residual(est: &VectorField2D, prev: &VectorField2D, params: &GammaParams) -> Result<VectorField2D> {
    est.ensure_same_dims(prev.dims())?;
    params.validate()?;
    let (h, w) = est.dims();
    let basis = gamma_basis(est, prev, params.order)?;
    let mut out = VectorField2D::zeros(h, w);
    for (k, [du, dv]) in basis.iter().enumerate() {
        for (o, d) in out.u_mut().iter_mut().zip(du.data()) {
            *o += params.cx[k] * d;
        }
        for (o, d) in out.v_mut().iter_mut().zip(dv.data()) {
            *o += params.cy[k] * d;
        }
    }
    Ok(out)
}

/// Intermediate fields of one corrector step.
#[derive(Debug, Clone)]
pub struct StepParts {
    pub tentative: VectorField2D,
    pub gain: VectorField2D,
    pub residual: VectorField2D,
    pub output: VectorField2D,
}

/// `u_t = u* + K (est - u*) + Phi` with `u*` the advection-diffusion
/// forecast of `prev`.
pub fn correct_step(prev: &VectorField2D, est: &VectorField2D, params: &CorrectorParams) -> Result<VectorField2D> {
    correct_step_parts(prev, est, params).map(|p| p.output)
}

pub fn correct_step_parts(prev: &VectorField2D, est: &VectorField2D, params: &CorrectorParams) -> Result<StepParts> {
    prev.ensure_same_dims(est.dims())?;
    params.validate()?;
    let tentative = advect_diffuse(prev, params.nu, params.dt)?;
    let gain = gate(est, &tentative, &params.gate)?;
    let residual = gamma_residual(est, prev, &params.gamma)?;
    let (h, w) = est.dims();
    let mut output = VectorField2D::zeros(h, w);
    for c in 0..2 {
        let (t, k, e, r) = (
            tentative.component(c),
            gain.component(c),
            est.component(c),
            residual.component(c),
        );
        for (i, o) in output.component_mut(c).iter_mut().enumerate() {
            *o = t[i] + k[i] * (e[i] - t[i]) + r[i];
        }
    }
    debug_assert!({
        let alt = blend_convex(&tentative, &gain, est, &residual);
        alt.max_abs_diff(&output) <= 1e-9 * (1.0 + output.max_norm())
    });
    Ok(StepParts {
        tentative,
        gain,
        residual,
        output,
    })
}

/// The same update written as `K est + (1 - K) u* + Phi`.
pub fn blend_convex(tent: &VectorField2D, gain: &VectorField2D, est: &VectorField2D, residual: &VectorField2D) -> VectorField2D {
    let (h, w) = est.dims();
    let mut out = VectorField2D::zeros(h, w);
    for c in 0..2 {
        let (t, k, e, r) = (tent.component(c), gain.component(c), est.component(c), residual.component(c));
        for (i, o) in out.component_mut(c).iter_mut().enumerate() {
            *o = k[i] * e[i] + (1.0 - k[i]) * t[i] + r[i];
        }
    }
    out
}

/// Loss settings of the corrector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrectorLossConfig {
    pub lambda_d: f64,
    pub penalty: Charbonnier,
    /// Border ring excluded from the means.
    pub ring: usize,
}

impl Default for CorrectorLossConfig {
    fn default() -> Self {
        Self {
            lambda_d: 0.05,
            penalty: Charbonnier::default(),
            ring: 2,
        }
    }
}

/// Temporal vorticity mismatch plus weighted divergence penalty; with
/// `grad`, accumulates the loss gradient with respect to `u_t`.
fn loss_with_grad(
    u_t: &VectorField2D,
    omega_hat: &ScalarField2D,
    cfg: &CorrectorLossConfig,
    mut grad: Option<(&mut [f64], &mut [f64])>,
) -> Result<f64> {
    let (h, w) = u_t.dims();
    let crop = Crop::new(h, w, cfg.ring)?;
    let n = crop.count() as f64;
    let (u, v) = (u_t.u(), u_t.v());
    let om = omega_hat.data();
    let pen = &cfg.penalty;
    let (mut temporal, mut div) = (0.0, 0.0);
    for (x, y, i) in crop.nodes() {
        let tx = crop.taps(x, y, 0);
        let ty = crop.taps(x, y, 1);
        let dx = |p: &[f64]| tx.iter().map(|&(i, c)| c * p[i]).sum::<f64>();
        let dy = |p: &[f64]| ty.iter().map(|&(i, c)| c * p[i]).sum::<f64>();
        let r = om[i] - (dx(v) - dy(u));
        let d = dx(u) + dy(v);
        let (pr, gr) = pen.eval_deriv(r);
        let (pd, gd) = pen.eval_deriv(d);
        temporal += pr;
        div += pd;
        if let Some((gu, gv)) = grad.as_mut() {
            let (kr, kd) = (gr / n, cfg.lambda_d * gd / n);
            // r depends on -dv/dx and +du/dy
            for &(i, c) in &tx {
                gv[i] -= kr * c;
                gu[i] += kd * c;
            }
            for &(i, c) in &ty {
                gu[i] += kr * c;
                gv[i] += kd * c;
            }
        }
    }
    Ok(temporal / n + cfg.lambda_d * div / n)
}

/// `mean pen(omega_hat - curl u_t) + lambda_d mean pen(div u_t)` with
/// `omega_hat` the previous vorticity transported by the previous velocity.
pub fn corrector_loss(
    u_t: &VectorField2D,
    omega_prev: &ScalarField2D,
    u_prev: &VectorField2D,
    nu: f64,
    dt: f64,
    cfg: &CorrectorLossConfig,
) -> Result<f64> {
    u_t.ensure_same_dims(u_prev.dims())?;
    omega_prev.ensure_same_dims(u_t.dims())?;
    let omega_hat = step_vorticity(omega_prev, u_prev, nu, dt)?;
    loss_with_grad(u_t, &omega_hat, cfg, None)
}

/// Loss of one corrected frame and its gradient with respect to the flat
/// trainable parameters, treating `prev` as a constant.
pub fn corrector_loss_param_grad(
    prev: &VectorField2D,
    est: &VectorField2D,
    omega_prev: &ScalarField2D,
    params: &CorrectorParams,
    cfg: &CorrectorLossConfig,
) -> Result<(f64, Vec<f64>)> {
    let parts = correct_step_parts(prev, est, params)?;
    let omega_hat = step_vorticity(omega_prev, prev, params.nu, params.dt)?;
    let (h, w) = est.dims();
    let mut gu = vec![0.0; h * w];
    let mut gv = vec![0.0; h * w];
    let loss = loss_with_grad(&parts.output, &omega_hat, cfg, Some((&mut gu, &mut gv)))?;
    let g_out = [gu, gv];

    let gate = &params.gate;
    let k2 = gate.size * gate.size;
    let mut g_we = vec![0.0; gate.we.len()];
    let mut g_wp = vec![0.0; gate.wp.len()];
    let mut g_b = [0.0; 2];
    for out in 0..2 {
        let (k, e, t) = (
            parts.gain.component(out),
            est.component(out),
            parts.tentative.component(out),
        );
        for y in 0..h {
            for x in 0..w {
                let i = y * w + x;
                let gz = g_out[out][i] * (e[i] - t[i]) * k[i] * (1.0 - k[i]);
                if gz == 0.0 {
                    continue;
                }
                g_b[out] += gz;
                for inp in 0..2 {
                    let base = (out * 2 + inp) * k2;
                    let (ei, ti) = (est.component(inp), parts.tentative.component(inp));
                    for_each_tap(x, y, h, w, gate.size, |tap, j| {
                        g_we[base + tap] += gz * ei[j];
                        g_wp[base + tap] += gz * ti[j];
                    });
                }
            }
        }
    }
    let basis = gamma_basis(est, prev, params.gamma.order)?;
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    let g_cx: Vec<f64> = basis.iter().map(|[du, _]| dot(&g_out[0], du.data())).collect();
    let g_cy: Vec<f64> = basis.iter().map(|[_, dv]| dot(&g_out[1], dv.data())).collect();
    let grad = [&g_we[..], &g_wp[..], &g_b[..], &g_cx[..], &g_cy[..]].concat();
    Ok((loss, grad))
}

/// Training settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step: f64,
    pub betas: (f64, f64),
    pub loss: CorrectorLossConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            step: 1e-2,
            betas: (0.9, 0.999),
            loss: CorrectorLossConfig::default(),
        }
    }
}

/// Result of [`train_corrector`].
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Parameters with the lowest mean loss seen.
    pub params: CorrectorParams,
    /// Mean loss at the start of every epoch, followed by the loss after the
    /// last update.
    pub losses: Vec<f64>,
    pub initial_loss: f64,
    pub best_loss: f64,
}

/// Runs the corrector over a sequence of optical estimates. The first
/// output is the first estimate itself.
pub fn correct_sequence(estimates: &[VectorField2D], params: &CorrectorParams) -> Result<Vec<VectorField2D>> {
    let mut out: Vec<VectorField2D> = Vec::with_capacity(estimates.len());
    for (t, est) in estimates.iter().enumerate() {
        let next = match out.last() {
            None => est.clone(),
            Some(prev) => correct_step(prev, est, params).map_err(|e| frame_error(e, t))?,
        };
        out.push(next);
    }
    Ok(out)
}

fn frame_error(e: Error, t: usize) -> Error {
    match e {
        Error::NonFinite(m) => Error::NonFinite(format!("{m} at frame {t}")),
        other => other,
    }
}

/// Mean corrector loss over frames `1..T` of a rollout and its gradient.
fn epoch(estimates: &[VectorField2D], params: &CorrectorParams, cfg: &CorrectorLossConfig) -> Result<(f64, Vec<f64>)> {
    let mut grad = vec![0.0; params.to_vec().len()];
    let mut total = 0.0;
    let mut prev = estimates[0].clone();
    let frames = (estimates.len() - 1) as f64;
    for (t, est) in estimates.iter().enumerate().skip(1) {
        let omega_prev = curl(&prev)?;
        let (loss, g) = corrector_loss_param_grad(&prev, est, &omega_prev, params, cfg).map_err(|e| frame_error(e, t))?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("corrector loss at frame {t}")));
        }
        total += loss / frames;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b / frames;
        }
        prev = correct_step(&prev, est, params)?;
    }
    Ok((total, grad))
}

/// Fits gate and residual parameters to a sequence of optical estimates by
/// minimizing the mean corrector loss. Each epoch rolls the sequence out with
/// the current parameters; gradients do not flow through earlier frames.
pub fn train_corrector(estimates: &[VectorField2D], init: &CorrectorParams, cfg: &TrainConfig) -> Result<TrainReport> {
    if estimates.len() < 3 {
        return Err(Error::InvalidParameter(format!(
            "training needs a sequence of at least 3 flow fields, got {}",
            estimates.len()
        )));
    }
    init.validate()?;
    let dims = estimates[0].dims();
    for e in estimates {
        e.ensure_same_dims(dims)?;
    }
    let mut params = init.clone();
    let mut flat = params.to_vec();
    let mut adam = Adam::new(flat.len(), cfg.step, cfg.betas);
    let (mut loss, mut grad) = epoch(estimates, &params, &cfg.loss)?;
    let initial_loss = loss;
    let mut best = (loss, params.clone());
    let mut losses = vec![loss];
    for _ in 0..cfg.epochs {
        adam.update(&mut flat, &grad, cfg.step);
        params.set_from_slice(&flat);
        (loss, grad) = epoch(estimates, &params, &cfg.loss)?;
        losses.push(loss);
        if loss < best.0 {
            best = (loss, params.clone());
        }
    }
    Ok(TrainReport {
        params: best.1,
        losses,
        initial_loss,
        best_loss: best.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::gradient;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(h: usize, w: usize, amp: f64, rng: &mut ChaCha8Rng) -> VectorField2D {
        VectorField2D::from_fn(h, w, |_, _| (rng.gen_range(-amp..amp), rng.gen_range(-amp..amp)))
    }

    fn smooth(h: usize, w: usize, phase: f64) -> VectorField2D {
        VectorField2D::from_fn(h, w, |x, y| {
            let (x, y) = (x as f64, y as f64);
            ((0.4 * y + phase).sin() * 0.6, (0.3 * x - phase).cos() * 0.5)
        })
    }

    #[test]
    fn gate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (a, b) = (random(6, 7, 3.0, &mut rng), random(6, 7, 3.0, &mut rng));
        let mut g = GateParams::zeros(3);
        assert!(gate(&a, &b, &g).unwrap().u().iter().all(|&k| k == 0.5));
        g.bias = [20.0, 20.0];
        assert!(gate(&a, &b, &g).unwrap().v().iter().all(|&k| (1.0 - k) < 1e-8));
        for v in g.we.iter_mut().chain(g.wp.iter_mut()) {
            *v = rng.gen_range(-5.0..5.0);
        }
        g.bias = [0.3, -0.2];
        let k = gate(&a, &b, &g).unwrap();
        assert!(k.u().iter().chain(k.v()).all(|&x| x > 0.0 && x < 1.0));
        assert!(gate(&a, &b, &GateParams::zeros(2)).is_err());
    }

    #[test]
    fn gamma_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (a, b) = (random(8, 8, 1.0, &mut rng), random(8, 8, 1.0, &mut rng));
        assert_eq!(gamma_residual(&a, &b, &GammaParams::zeros(3)).unwrap().max_norm(), 0.0);
        let mut g = GammaParams::zeros(3);
        g.cx = (0..6).map(|i| i as f64 - 2.5).collect();
        g.cy = (0..6).map(|i| 0.3 * i as f64).collect();
        assert_eq!(gamma_residual(&a, &a, &g).unwrap().max_norm(), 0.0);
        let mut id = GammaParams::zeros(3);
        id.cx[0] = 1.0;
        id.cy[0] = 1.0;
        assert_eq!(gamma_residual(&a, &b, &id).unwrap(), a.sub(&b));
        assert_eq!(
            GammaParams::indices(3),
            vec![(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2)]
        );
        assert!(matches!(
            gamma_residual(&a, &b, &GammaParams::zeros(6)),
            Err(Error::OrderTooHigh { .. })
        ));
    }

    #[test]
    fn gate_extremes_collapse_the_update() {
        let (prev, est) = (smooth(10, 10, 0.0), smooth(10, 10, 0.3));
        let mut p = CorrectorParams::new(0.01, 1.0);
        p.gate.bias = [40.0, 40.0];
        assert!(correct_step(&prev, &est, &p).unwrap().max_abs_diff(&est) < 1e-8);
        p.gate.bias = [-40.0, -40.0];
        let tent = advect_diffuse(&prev, 0.01, 1.0).unwrap();
        assert!(correct_step(&prev, &est, &p).unwrap().max_abs_diff(&tent) < 1e-8);
    }

    #[test]
    fn both_assemblies_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut p = CorrectorParams::new(0.05, 1.0);
        let mut flat = p.to_vec();
        flat.iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        p.set_from_slice(&flat);
        let (prev, est) = (random(9, 9, 0.8, &mut rng), random(9, 9, 0.8, &mut rng));
        let parts = correct_step_parts(&prev, &est, &p).unwrap();
        let alt = blend_convex(&parts.tentative, &parts.gain, &est, &parts.residual);
        assert!(alt.max_abs_diff(&parts.output) <= 1e-12);
    }

    #[test]
    fn loss_of_matching_solenoidal_field() {
        // A stream-function field whose curl is used as the transported target.
        let (h, w) = (12, 12);
        let psi = ScalarField2D::from_fn(h, w, |x, y| (0.5 * x as f64).sin() * (0.4 * y as f64).cos());
        let g = gradient(&psi).unwrap();
        let u_t = VectorField2D::from_vecs(h, w, g.v().to_vec(), g.u().iter().map(|a| -a).collect()).unwrap();
        let prev = VectorField2D::zeros(h, w);
        // zero previous velocity and zero viscosity leave omega_prev untouched
        let omega_prev = curl(&u_t).unwrap();
        let cfg = CorrectorLossConfig::default();
        let l = corrector_loss(&u_t, &omega_prev, &prev, 0.0, 1.0, &cfg).unwrap();
        let s0 = cfg.penalty.eval(0.0);
        // central div of this rotated gradient vanishes only up to the
        // commutation of the two central differences, which is exact
        assert!((l - (1.0 + cfg.lambda_d) * s0).abs() < 1e-12);
    }

    #[test]
    fn gradient_perturbation_does_not_change_temporal_term() {
        let (h, w) = (12, 12);
        let base = smooth(h, w, 0.1);
        let phi = ScalarField2D::from_fn(h, w, |x, y| 0.05 * ((x * x) as f64 - (y * x) as f64 * 0.5));
        let pert = base.add(&gradient(&phi).unwrap());
        let prev = smooth(h, w, 0.0).scale(0.3);
        let omega = curl(&prev).unwrap();
        let cfg = CorrectorLossConfig {
            lambda_d: 0.0,
            ..CorrectorLossConfig::default()
        };
        let a = corrector_loss(&base, &omega, &prev, 0.01, 1.0, &cfg).unwrap();
        let b = corrector_loss(&pert, &omega, &prev, 0.01, 1.0, &cfg).unwrap();
        assert!((a - b).abs() < 1e-12);
        let doubled = base.sub(&prev).scale(2.0).add(&prev);
        let c = corrector_loss(&doubled, &omega, &prev, 0.0, 1.0, &cfg).unwrap();
        let d = corrector_loss(&base, &omega, &prev, 0.0, 1.0, &cfg).unwrap();
        assert!(c > d);
    }

    #[test]
    fn param_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let (prev, est) = (random(8, 8, 0.6, &mut rng), random(8, 8, 0.6, &mut rng));
        let omega = curl(&random(8, 8, 0.6, &mut rng)).unwrap();
        let mut p = CorrectorParams::new(0.02, 1.0);
        let mut flat = p.to_vec();
        flat.iter_mut().for_each(|v| *v = rng.gen_range(-0.3..0.3));
        p.set_from_slice(&flat);
        let cfg = CorrectorLossConfig::default();
        let (_, g) = corrector_loss_param_grad(&prev, &est, &omega, &p, &cfg).unwrap();
        let e = 1e-6;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..flat.len() {
            let mut q = p.clone();
            let mut f = flat.clone();
            f[k] += e;
            q.set_from_slice(&f);
            let up = corrector_loss_param_grad(&prev, &est, &omega, &q, &cfg).unwrap().0;
            f[k] -= 2.0 * e;
            q.set_from_slice(&f);
            let dn = corrector_loss_param_grad(&prev, &est, &omega, &q, &cfg).unwrap().0;
            let fd = (up - dn) / (2.0 * e);
            num += (fd - g[k]).powi(2);
            den += g[k].powi(2);
        }
        assert!((num / den).sqrt() < 1e-4, "relative error {}", (num / den).sqrt());
    }

    #[test]
    fn training_is_deterministic_and_never_worse() {
        let seq: Vec<_> = (0..5).map(|t| smooth(10, 10, 0.1 * t as f64)).collect();
        let p0 = CorrectorParams::new(0.01, 1.0);
        let cfg = TrainConfig {
            epochs: 15,
            ..TrainConfig::default()
        };
        let a = train_corrector(&seq, &p0, &cfg).unwrap();
        let b = train_corrector(&seq, &p0, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.best_loss <= a.initial_loss);
        assert_eq!(a.losses.len(), 16);

        let frozen = train_corrector(&seq, &p0, &TrainConfig { step: 0.0, ..cfg }).unwrap();
        assert_eq!(frozen.params, p0);
        assert!(frozen.losses.iter().all(|&l| l == frozen.initial_loss));
        assert!(train_corrector(&seq[..2], &p0, &cfg).is_err());
    }
}
