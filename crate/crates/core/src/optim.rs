//! Adaptive-moment (Adam) parameter updates.

/// Adam state for a flat parameter vector.
#[derive(Debug, Clone)]
pub struct Adam {
    step: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: i32,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(len: usize, step: f64, betas: (f64, f64)) -> Self {
        Self {
            step,
            beta1: betas.0,
            beta2: betas.1,
            eps: 1e-8,
            t: 0,
            m: vec![0.0; len],
            v: vec![0.0; len],
        }
    }

    pub fn step_size(&self) -> f64 {
        self.step
    }

    /// Applies one update of `params` along `grad` with the given step size.
    pub fn update(&mut self, params: &mut [f64], grad: &[f64], step: f64) {
        debug_assert_eq!(params.len(), self.m.len());
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= step * mh / (vh.sqrt() + self.eps);
        }
    }

    /// Clears the moment estimates, keeping the configured step.
    pub fn reset(&mut self) {
        self.t = 0;
        self.m.iter_mut().for_each(|a| *a = 0.0);
        self.v.iter_mut().for_each(|a| *a = 0.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_step_size() {
        let mut a = Adam::new(2, 0.1, (0.9, 0.999));
        let mut p = [1.0, -1.0];
        a.update(&mut p, &[3.0, -0.5], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn minimises_a_quadratic() {
        let mut a = Adam::new(1, 0.05, (0.9, 0.999));
        let mut p = [4.0];
        for _ in 0..2000 {
            let g = [2.0 * (p[0] - 1.5)];
            a.update(&mut p, &g, 0.05);
        }
        assert!((p[0] - 1.5).abs() < 1e-3);
    }
}
