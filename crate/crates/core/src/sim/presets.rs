use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    pressure_project, render_sequence, step_ns, Boundary, Obstacle, SimConfig, SimState, WallFlux,
};
use crate::error::{Error, Result};
use crate::fields::{diff_x, diff_y, ScalarField2D, VectorField2D};
use crate::warp::{warp_gaussian, WarpConfig};

/// Largest displacement drawn by the uniform preset, in pixels per frame.
pub const UNIFORM_MAX_DISPLACEMENT: f64 = 5.0;

/// Flow scenario used to generate ground truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Preset {
    /// Constant displacement; drawn from the seed when not given.
    Uniform { displacement: Option<(f64, f64)> },
    /// Decaying vortex array between free-slip walls.
    TaylorGreen { amplitude: f64, modes: usize },
    /// Random band-limited solenoidal start, then free decay.
    DecayingTurbulence { max_displacement: f64 },
    /// Channel flow past a disk streaming along +y, like footage with the
    /// flow pointing down the image; `warmup` steps run before recording.
    CylinderWake { inflow: f64, warmup: usize },
}

impl Preset {
    pub const NAMES: [&'static str; 4] = ["uniform", "taylor-green", "decaying-turbulence", "cylinder-wake"];

    /// Preset with default parameters by command-line name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "uniform" => Preset::Uniform { displacement: None },
            "taylor-green" => Preset::TaylorGreen {
                amplitude: 1.0,
                modes: 2,
            },
            "decaying-turbulence" => Preset::DecayingTurbulence {
                max_displacement: 2.0,
            },
            "cylinder-wake" => Preset::CylinderWake {
                inflow: 1.0,
                warmup: 400,
            },
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown preset '{other}', expected one of {}",
                    Self::NAMES.join(", ")
                )))
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Preset::Uniform { .. } => "uniform",
            Preset::TaylorGreen { .. } => "taylor-green",
            Preset::DecayingTurbulence { .. } => "decaying-turbulence",
            Preset::CylinderWake { .. } => "cylinder-wake",
        }
    }
}

/// Analytic Taylor-Green velocity with free-slip walls on the faces between
/// the outer two rows and columns. Square grids give the classic
/// `(sin x cos y, -cos x sin y) e^{-2 nu k^2 t}` form.
pub fn taylor_green(h: usize, w: usize, amplitude: f64, modes: usize, nu: f64, t: f64) -> VectorField2D {
    let kx = PI * modes as f64 / (w as f64 - 2.0);
    let ky = PI * modes as f64 / (h as f64 - 2.0);
    let kmax = kx.max(ky);
    let decay = (-nu * (kx * kx + ky * ky) * t).exp();
    VectorField2D::from_fn(h, w, |x, y| {
        let (xs, ys) = (kx * (x as f64 - 0.5), ky * (y as f64 - 0.5));
        (
            amplitude * ky / kmax * xs.sin() * ys.cos() * decay,
            -amplitude * kx / kmax * xs.cos() * ys.sin() * decay,
        )
    })
}

fn initial_tracer(h: usize, w: usize) -> ScalarField2D {
    ScalarField2D::from_fn(h, w, |x, y| {
        0.5 + 0.5 * (2.0 * PI * x as f64 / 16.0).sin() * (2.0 * PI * y as f64 / 16.0).sin()
    })
}

fn turbulent_start(h: usize, w: usize, max_displacement: f64, cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Result<VectorField2D> {
    let mut modes = Vec::new();
    for kx in 0..=6i32 {
        for ky in -6..=6i32 {
            let k = ((kx * kx + ky * ky) as f64).sqrt();
            if (2.0..=6.0).contains(&k) && (kx > 0 || ky > 0) {
                let amp = rng.gen_range(0.5..1.5) / k;
                let phase = rng.gen_range(0.0..2.0 * PI);
                modes.push((kx as f64, ky as f64, amp, phase));
            }
        }
    }
    // The window makes the stream function vanish on the walls.
    let win = |p: f64, n: usize| (PI * p / (n - 1) as f64).sin().powi(2);
    let psi = ScalarField2D::from_fn(h, w, |x, y| {
        let (xf, yf) = (x as f64, y as f64);
        let s: f64 = modes
            .iter()
            .map(|&(kx, ky, a, ph)| a * (2.0 * PI * (kx * xf / w as f64 + ky * yf / h as f64) + ph).cos())
            .sum();
        s * win(xf, w) * win(yf, h)
    });
    let gx = diff_x(psi.data(), h, w);
    let gy = diff_y(psi.data(), h, w);
    let u = VectorField2D::from_vecs(h, w, gy, gx.iter().map(|a| -a).collect())?;
    let u = pressure_project(&u, cfg.rho, cfg.dt, &cfg.solver)?.velocity;
    let peak = u.max_norm() * cfg.dt;
    if peak == 0.0 {
        return Ok(u);
    }
    Ok(u.scale(max_displacement / peak))
}

/// Disk of the cylinder-wake preset on an `h x w` grid. The wake runs down
/// the column through its centre.
pub fn cylinder_obstacle(h: usize, w: usize) -> Obstacle {
    let t = stream_obstacle(w, h);
    Obstacle {
        cx: t.cy,
        cy: t.cx,
        radius: t.radius,
    }
}

/// The same disk in the streamwise-along-x frame the wake is computed in.
fn stream_obstacle(h: usize, w: usize) -> Obstacle {
    // Slightly off-centre so that shedding starts without waiting on rounding noise.
    Obstacle {
        cx: w as f64 / 4.0,
        cy: h as f64 / 2.0 + 0.37,
        radius: (h as f64 / 10.0).max(1.5),
    }
}

fn transpose_state(s: &SimState) -> SimState {
    let (h, w) = s.velocity.dims();
    let flip = |f: &ScalarField2D| ScalarField2D::from_fn(w, h, |x, y| f.get(y, x));
    SimState {
        velocity: VectorField2D::from_fn(w, h, |x, y| {
            let (a, b) = s.velocity.get(y, x);
            (b, a)
        }),
        pressure: flip(&s.pressure),
        tracer: flip(&s.tracer),
        time: s.time,
    }
}

/// Runs a preset for `steps` steps, returning `steps + 1` states.
pub fn simulate(preset: &Preset, cfg: &SimConfig, h: usize, w: usize, steps: usize, seed: u64) -> Result<Vec<SimState>> {
    if let Preset::CylinderWake { .. } = preset {
        // The solver treats both axes alike, so the +y stream is the
        // transpose of a +x stream with inflow on the left.
        let states = simulate_streamwise_x(preset, cfg, w, h, steps, seed)?;
        return Ok(states.iter().map(transpose_state).collect());
    }
    simulate_streamwise_x(preset, cfg, h, w, steps, seed)
}

fn simulate_streamwise_x(
    preset: &Preset,
    cfg: &SimConfig,
    h: usize,
    w: usize,
    steps: usize,
    seed: u64,
) -> Result<Vec<SimState>> {
    cfg.validate()?;
    crate::fields::check_min_dims(h, w, 8)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut cfg = cfg.clone();
    let tracer = initial_tracer(h, w);
    let mut warmup = 0;
    let velocity = match *preset {
        Preset::Uniform { displacement } => {
            let (dx, dy) = displacement.unwrap_or_else(|| {
                let mag = rng.gen_range(0.0..=UNIFORM_MAX_DISPLACEMENT);
                let ang = rng.gen_range(0.0..2.0 * PI);
                (mag * ang.cos(), mag * ang.sin())
            });
            let u = VectorField2D::constant(h, w, (dx / cfg.dt, dy / cfg.dt));
            return uniform_states(u, tracer, &cfg, steps);
        }
        Preset::TaylorGreen { amplitude, modes } => taylor_green(h, w, amplitude, modes.max(1), cfg.nu, 0.0),
        Preset::DecayingTurbulence { max_displacement } => turbulent_start(h, w, max_displacement, &cfg, &mut rng)?,
        Preset::CylinderWake { inflow, warmup: n } => {
            warmup = n;
            let speed = inflow / cfg.dt;
            let obstacle = stream_obstacle(h, w);
            cfg.boundary = Boundary {
                flux: WallFlux {
                    left: -speed,
                    right: speed,
                    ..WallFlux::default()
                },
                inflow: Some(speed),
                obstacle: Some(obstacle),
            };
            let mut u = VectorField2D::constant(h, w, (speed, 0.0));
            for y in 0..h {
                for x in 0..w {
                    if obstacle.contains(x, y) {
                        u.set(x, y, (0.0, 0.0));
                    } else if x > 2 && (y as f64) > obstacle.cy {
                        u.set(x, y, (speed, 0.02 * speed * rng.gen_range(-1.0..1.0)));
                    }
                }
            }
            super::pressure_project_with_flux(&u, cfg.rho, cfg.dt, &cfg.boundary.flux, &cfg.solver)?.velocity
        }
    };
    let mut state = SimState::new(velocity, tracer)?;
    for _ in 0..warmup {
        state = step_ns(&state, &cfg)?;
    }
    if warmup > 0 {
        state.tracer = initial_tracer(h, w);
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(state);
    for _ in 0..steps {
        let next = step_ns(states.last().expect("non-empty"), &cfg)?;
        states.push(next);
    }
    Ok(states)
}

fn uniform_states(u: VectorField2D, tracer: ScalarField2D, cfg: &SimConfig, steps: usize) -> Result<Vec<SimState>> {
    let displacement = u.scale(cfg.dt);
    let mut state = SimState::new(u, tracer)?;
    let mut states = vec![state.clone()];
    for _ in 0..steps {
        state.tracer = warp_gaussian(&state.tracer, &displacement, &WarpConfig::new(cfg.tracer_diffusion, cfg.dt))?;
        state.time += cfg.dt;
        states.push(state.clone());
    }
    Ok(states)
}

/// Parameters of a synthetic image sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub preset: Preset,
    pub height: usize,
    pub width: usize,
    pub frames: usize,
    pub particles: usize,
    pub particle_radius: f64,
    pub seed: u64,
}

/// Rendered frames and the ground-truth displacement of each consecutive pair.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub images: Vec<ScalarField2D>,
    /// `flows[t]` carries `images[t]` onto `images[t + 1]`.
    pub flows: Vec<VectorField2D>,
}

/// Simulates a preset and renders particle images along it.
pub fn gen_dataset(cfg: &SimConfig, spec: &DatasetSpec) -> Result<Dataset> {
    if spec.frames < 2 {
        return Err(Error::InvalidParameter(format!(
            "a dataset needs at least 2 frames, got {}",
            spec.frames
        )));
    }
    let states = simulate(&spec.preset, cfg, spec.height, spec.width, spec.frames - 1, spec.seed)?;
    let flows: Vec<VectorField2D> = states[1..].iter().map(|s| s.velocity.scale(cfg.dt)).collect();
    let images = render_sequence(&flows, spec.particles, spec.particle_radius, particle_seed(spec.seed))?;
    Ok(Dataset { images, flows })
}

/// Seed of the particle stream derived from a dataset seed.
pub(crate) fn particle_seed(seed: u64) -> u64 {
    seed ^ 0x9e37_79b9_7f4a_7c15
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::divergence;

    fn spec(preset: Preset, frames: usize) -> DatasetSpec {
        DatasetSpec {
            preset,
            height: 24,
            width: 32,
            frames,
            particles: 80,
            particle_radius: 1.5,
            seed: 17,
        }
    }

    #[test]
    fn uniform_ground_truth_is_the_displacement() {
        let d = gen_dataset(
            &SimConfig::default(),
            &spec(Preset::Uniform { displacement: Some((2.0, 0.0)) }, 4),
        )
        .unwrap();
        assert_eq!(d.images.len(), 4);
        assert_eq!(d.flows.len(), 3);
        for f in &d.flows {
            assert!(f.u().iter().all(|&a| a == 2.0) && f.v().iter().all(|&b| b == 0.0));
        }
    }

    #[test]
    fn random_uniform_respects_magnitude_bound() {
        for seed in 0..20 {
            let s = simulate(&Preset::Uniform { displacement: None }, &SimConfig::default(), 8, 8, 1, seed).unwrap();
            let m = s[1].velocity.max_norm();
            assert!(m <= UNIFORM_MAX_DISPLACEMENT + 1e-12);
        }
    }

    #[test]
    fn same_seed_same_dataset() {
        let s = spec(Preset::DecayingTurbulence { max_displacement: 1.5 }, 3);
        let a = gen_dataset(&SimConfig::default(), &s).unwrap();
        let b = gen_dataset(&SimConfig::default(), &s).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn turbulence_flows_are_divergence_free() {
        let d = gen_dataset(
            &SimConfig::default(),
            &spec(Preset::DecayingTurbulence { max_displacement: 2.0 }, 4),
        )
        .unwrap();
        for f in &d.flows {
            let div = divergence(f).unwrap();
            for y in 1..23 {
                for x in 1..31 {
                    assert!(div.get(x, y).abs() < 1e-5);
                }
            }
            assert!(f.max_norm() > 0.5);
        }
    }

    #[test]
    fn taylor_green_satisfies_walls() {
        let u = taylor_green(20, 20, 1.0, 2, 0.0, 0.0);
        for y in 0..20 {
            let (a, _) = u.get(0, y);
            let (b, _) = u.get(1, y);
            assert!((a + b).abs() < 1e-12);
        }
    }

    #[test]
    fn unknown_preset_is_rejected() {
        assert!(Preset::from_name("vortex").is_err());
        for n in Preset::NAMES {
            assert_eq!(Preset::from_name(n).unwrap().name(), n);
        }
        assert!(gen_dataset(&SimConfig::default(), &spec(Preset::Uniform { displacement: None }, 1)).is_err());
    }
}
