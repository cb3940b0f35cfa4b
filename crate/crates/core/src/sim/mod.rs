//! Incompressible flow simulation and synthetic particle imagery.

mod particles;
mod poisson;
mod presets;

pub use particles::{advect_particles, render_particles, render_sequence, ParticleSet};
pub use poisson::{
    apply_pressure, pressure_project, pressure_project_with_flux, Projection, SolverOptions, WallFlux,
};
pub use presets::{cylinder_obstacle, gen_dataset, simulate, taylor_green, Dataset, DatasetSpec, Preset};

use crate::error::{Error, Result};
use crate::fields::{check_min_dims, laplacian_plane, ScalarField2D, VectorField2D};
use crate::warp::{sample_vector, warp_gaussian, WarpConfig};

/// Default tracer diffusion in pixel² per frame.
pub const TRACER_DIFFUSION: f64 = 0.05;

/// A disk held at rest inside the flow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Obstacle {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl Obstacle {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        (x as f64 - self.cx).hypot(y as f64 - self.cy) <= self.radius
    }
}

/// Wall and obstacle conditions applied to the tentative velocity.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Boundary {
    pub flux: WallFlux,
    /// Uniform horizontal velocity imposed on the two leftmost columns.
    pub inflow: Option<f64>,
    pub obstacle: Option<Obstacle>,
}

/// Physical constants and solver settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub nu: f64,
    pub rho: f64,
    pub dt: f64,
    /// Body force in pixels per frame², absent means zero.
    pub force: Option<VectorField2D>,
    pub solver: SolverOptions,
    pub tracer_diffusion: f64,
    pub boundary: Boundary,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            nu: 0.01,
            rho: 1.0,
            dt: 1.0,
            force: None,
            solver: SolverOptions::default(),
            tracer_diffusion: TRACER_DIFFUSION,
            boundary: Boundary::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")))
            }
        };
        positive("viscosity", self.nu)?;
        positive("density", self.rho)?;
        positive("time step", self.dt)?;
        positive("solver tolerance", self.solver.tolerance)?;
        if !(self.tracer_diffusion >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "tracer diffusion must be non-negative, got {}",
                self.tracer_diffusion
            )));
        }
        Ok(())
    }
}

/// Velocity, pressure and tracer at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub velocity: VectorField2D,
    pub pressure: ScalarField2D,
    pub tracer: ScalarField2D,
    pub time: f64,
}

impl SimState {
    pub fn new(velocity: VectorField2D, tracer: ScalarField2D) -> Result<Self> {
        velocity.ensure_same_dims(tracer.dims())?;
        let (h, w) = velocity.dims();
        Ok(Self {
            velocity,
            pressure: ScalarField2D::zeros(h, w),
            tracer,
            time: 0.0,
        })
    }
}

fn check_cfl(u: &VectorField2D, dt: f64) -> Result<()> {
    let (h, w) = u.dims();
    let displacement = u.max_norm() * dt;
    let limit = h.min(w) as f64 / 4.0;
    if !(displacement < limit) {
        return Err(Error::Cfl { displacement, limit });
    }
    Ok(())
}

/// Tentative velocity: semi-Lagrangian self-advection plus explicit viscous
/// diffusion, `u*(x) = u(x - dt u(x)) + dt nu lap(u)(x)`.
pub fn advect_diffuse(u_prev: &VectorField2D, nu: f64, dt: f64) -> Result<VectorField2D> {
    let (h, w) = u_prev.dims();
    check_min_dims(h, w, 3)?;
    if !(dt > 0.0) || !(nu >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "need dt > 0 and nu >= 0, got dt = {dt}, nu = {nu}"
        )));
    }
    if nu * dt > 0.25 {
        return Err(Error::InvalidParameter(format!(
            "explicit diffusion is unstable for nu * dt = {} > 0.25",
            nu * dt
        )));
    }
    check_cfl(u_prev, dt)?;
    let lu = laplacian_plane(u_prev.u(), h, w);
    let lv = laplacian_plane(u_prev.v(), h, w);
    let k = nu * dt;
    Ok(VectorField2D::from_fn(h, w, |x, y| {
        let i = y * w + x;
        let (a, b) = u_prev.get(x, y);
        let (su, sv) = sample_vector(u_prev, x as f64 - dt * a, y as f64 - dt * b);
        (su + k * lu[i], sv + k * lv[i])
    }))
}

/// Advances the state by one projection step.
pub fn step_ns(state: &SimState, cfg: &SimConfig) -> Result<SimState> {
    cfg.validate()?;
    let (h, w) = state.velocity.dims();
    let mut u_star = advect_diffuse(&state.velocity, cfg.nu, cfg.dt)?;
    if let Some(f) = &cfg.force {
        f.ensure_same_dims((h, w))?;
        u_star = u_star.zip_map(f, |a, b| a + cfg.dt * b);
    }
    let bc = &cfg.boundary;
    if let Some(u_in) = bc.inflow {
        for y in 0..h {
            for x in 0..2.min(w) {
                u_star.set(x, y, (u_in, 0.0));
            }
        }
    }
    if let Some(ob) = &bc.obstacle {
        for y in 0..h {
            for x in 0..w {
                if ob.contains(x, y) {
                    u_star.set(x, y, (0.0, 0.0));
                }
            }
        }
    }
    let proj = pressure_project_with_flux(&u_star, cfg.rho, cfg.dt, &bc.flux, &cfg.solver)?;
    let displacement = proj.velocity.scale(cfg.dt);
    let tracer = warp_gaussian(
        &state.tracer,
        &displacement,
        &WarpConfig::new(cfg.tracer_diffusion, cfg.dt),
    )?;
    Ok(SimState {
        velocity: proj.velocity,
        pressure: proj.pressure,
        tracer,
        time: state.time + cfg.dt,
    })
}

/// Advects and diffuses vorticity with one Gaussian transport kernel.
pub fn step_vorticity(omega: &ScalarField2D, u: &VectorField2D, nu: f64, dt: f64) -> Result<ScalarField2D> {
    omega.ensure_same_dims(u.dims())?;
    check_cfl(u, dt)?;
    warp_gaussian(omega, &u.scale(dt), &WarpConfig::new(nu, dt))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::divergence;

    #[test]
    fn constant_and_zero_fields_are_fixed_points() {
        let c = VectorField2D::constant(8, 9, (0.7, -1.1));
        assert!(advect_diffuse(&c, 0.1, 0.5).unwrap().max_abs_diff(&c) < 1e-15);
        let z = VectorField2D::zeros(8, 9);
        assert_eq!(advect_diffuse(&z, 0.1, 0.5).unwrap(), z);
    }

    #[test]
    fn cfl_and_diffusion_limits() {
        let fast = VectorField2D::constant(8, 8, (3.0, 0.0));
        assert!(matches!(advect_diffuse(&fast, 0.0, 1.0), Err(Error::Cfl { .. })));
        let slow = VectorField2D::constant(8, 8, (0.1, 0.0));
        assert!(advect_diffuse(&slow, 1.0, 1.0).is_err());
        assert!(matches!(
            step_vorticity(&ScalarField2D::zeros(8, 8), &fast, 0.1, 1.0),
            Err(Error::Cfl { .. })
        ));
    }

    #[test]
    fn quiescent_state_only_advances_time() {
        let s = SimState::new(
            VectorField2D::zeros(10, 12),
            ScalarField2D::from_fn(10, 12, |x, _| x as f64 / 11.0),
        )
        .unwrap();
        let cfg = SimConfig {
            tracer_diffusion: 0.0,
            dt: 0.5,
            ..SimConfig::default()
        };
        let n = step_ns(&s, &cfg).unwrap();
        assert_eq!(n.velocity, s.velocity);
        assert_eq!(n.tracer, s.tracer);
        assert_eq!(n.time, 0.5);
    }

    #[test]
    fn step_output_is_divergence_free() {
        let s = SimState::new(
            VectorField2D::from_fn(20, 20, |x, y| ((0.3 * y as f64).sin(), (0.2 * x as f64).cos())),
            ScalarField2D::zeros(20, 20),
        )
        .unwrap();
        let n = step_ns(&s, &SimConfig::default()).unwrap();
        let d = divergence(&n.velocity).unwrap();
        for y in 1..19 {
            for x in 1..19 {
                assert!(d.get(x, y).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn vorticity_constant_and_zero() {
        let u = VectorField2D::from_fn(10, 10, |x, y| (-(y as f64 - 4.5) * 0.1, (x as f64 - 4.5) * 0.1));
        let c = ScalarField2D::filled(10, 10, 3.0);
        let out = step_vorticity(&c, &u, 0.0, 1.0).unwrap();
        assert!(out.data().iter().all(|v| (v - 3.0).abs() < 1e-14));
        let z = ScalarField2D::zeros(10, 10);
        assert_eq!(step_vorticity(&z, &u, 0.2, 1.0).unwrap().max_abs(), 0.0);
    }
}
