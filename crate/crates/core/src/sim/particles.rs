use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fields::{check_min_dims, ScalarField2D, VectorField2D};
use crate::warp::sample_vector;

/// Tracer particles rendered as Gaussian blobs.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    /// `(x, y)` pixel coordinates.
    pub positions: Vec<(f64, f64)>,
    /// Peak brightness in (0, 1].
    pub intensity: f64,
    /// Blob standard deviation in pixels.
    pub radius: f64,
}

impl ParticleSet {
    /// `count` particles placed uniformly over an `h x w` domain.
    pub fn random(count: usize, h: usize, w: usize, intensity: f64, radius: f64, rng: &mut impl Rng) -> Self {
        let positions = (0..count)
            .map(|_| (uniform(rng, w), uniform(rng, h)))
            .collect();
        Self {
            positions,
            intensity,
            radius,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.intensity > 0.0 && self.intensity <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "particle intensity must lie in (0, 1], got {}",
                self.intensity
            )));
        }
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "particle radius must be positive, got {}",
                self.radius
            )));
        }
        if self.positions.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::NonFinite("particle position".into()));
        }
        Ok(())
    }
}

fn uniform(rng: &mut impl Rng, n: usize) -> f64 {
    rng.gen_range(0.0..(n - 1) as f64)
}

/// Sum of Gaussian blobs, clamped to [0, 1].
pub fn render_particles(particles: &ParticleSet, h: usize, w: usize) -> Result<ScalarField2D> {
    check_min_dims(h, w, 8)?;
    particles.validate()?;
    let mut img = vec![0.0; h * w];
    let s = particles.radius;
    let reach = (6.0 * s).ceil();
    let inv = 1.0 / (2.0 * s * s);
    for &(px, py) in &particles.positions {
        let x0 = (px - reach).floor().max(0.0) as usize;
        let y0 = (py - reach).floor().max(0.0) as usize;
        let x1 = ((px + reach).ceil() as isize).min(w as isize - 1);
        let y1 = ((py + reach).ceil() as isize).min(h as isize - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        for y in y0..=y1 as usize {
            let dy = y as f64 - py;
            for x in x0..=x1 as usize {
                let dx = x as f64 - px;
                img[y * w + x] += particles.intensity * (-(dx * dx + dy * dy) * inv).exp();
            }
        }
    }
    for v in &mut img {
        *v = v.clamp(0.0, 1.0);
    }
    ScalarField2D::from_vec(h, w, img)
}

/// Moves every particle by `dt u(pos)`; particles that leave the domain are
/// replaced at a uniformly random position.
pub fn advect_particles(particles: &ParticleSet, u: &VectorField2D, dt: f64, rng: &mut impl Rng) -> ParticleSet {
    let (h, w) = u.dims();
    let positions = particles
        .positions
        .iter()
        .map(|&(x, y)| {
            let (a, b) = sample_vector(u, x, y);
            let (nx, ny) = (x + dt * a, y + dt * b);
            if nx >= 0.0 && nx <= (w - 1) as f64 && ny >= 0.0 && ny <= (h - 1) as f64 {
                (nx, ny)
            } else {
                (uniform(rng, w), uniform(rng, h))
            }
        })
        .collect();
    ParticleSet {
        positions,
        intensity: particles.intensity,
        radius: particles.radius,
    }
}

/// Renders `flows.len() + 1` frames: particles are seeded, drawn, then carried
/// by each displacement field in turn.
pub fn render_sequence(flows: &[VectorField2D], count: usize, radius: f64, seed: u64) -> Result<Vec<ScalarField2D>> {
    let (h, w) = flows
        .first()
        .map(|f| f.dims())
        .ok_or_else(|| Error::InvalidParameter("at least one flow field is required".into()))?;
    for f in flows {
        f.ensure_same_dims((h, w))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut particles = ParticleSet::random(count, h, w, 1.0, radius, &mut rng);
    let mut frames = vec![render_particles(&particles, h, w)?];
    for f in flows {
        particles = advect_particles(&particles, f, 1.0, &mut rng);
        frames.push(render_particles(&particles, h, w)?);
    }
    Ok(frames)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(positions: Vec<(f64, f64)>) -> ParticleSet {
        ParticleSet {
            positions,
            intensity: 1.0,
            radius: 1.5,
        }
    }

    #[test]
    fn empty_and_centred_particles() {
        assert_eq!(render_particles(&set(vec![]), 16, 16).unwrap().max_abs(), 0.0);
        let img = render_particles(&set(vec![(8.0, 8.0)]), 17, 17).unwrap();
        assert_eq!(img.get(8, 8), 1.0);
        assert!(img.get(7, 8) < 1.0);
        assert!(render_particles(&set(vec![]), 7, 16).is_err());
    }

    #[test]
    fn distant_particles_superpose() {
        let one = render_particles(&set(vec![(15.0, 16.0)]), 32, 48).unwrap();
        let two = render_particles(&set(vec![(15.0, 16.0), (30.0, 16.0)]), 32, 48).unwrap();
        assert!((two.sum() - 2.0 * one.sum()).abs() < 1e-6);
        let maxima = (1..47)
            .filter(|&x| two.get(x, 16) > two.get(x - 1, 16) && two.get(x, 16) > two.get(x + 1, 16))
            .count();
        assert_eq!(maxima, 2);
    }

    #[test]
    fn advection_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = set(vec![(3.2, 4.1), (7.5, 2.0)]);
        let still = advect_particles(&p, &VectorField2D::zeros(12, 12), 1.0, &mut rng);
        assert_eq!(still, p);
        let moved = advect_particles(&p, &VectorField2D::constant(12, 12, (1.0, 0.0)), 1.0, &mut rng);
        for (a, b) in moved.positions.iter().zip(&p.positions) {
            assert_eq!(a.0, b.0 + 1.0);
            assert_eq!(a.1, b.1);
        }
    }

    #[test]
    fn rotation_preserves_radius_to_second_order() {
        let c = 32.0;
        let u = VectorField2D::from_fn(65, 65, |x, y| (-(y as f64 - c), x as f64 - c));
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let p = set(vec![(c + 10.0, c), (c, c + 5.0), (c - 7.0, c - 7.0)]);
        for dt in [1e-2, 5e-3] {
            let q = advect_particles(&p, &u, dt, &mut rng);
            for (a, b) in q.positions.iter().zip(&p.positions) {
                let r0 = (b.0 - c).hypot(b.1 - c);
                let r1 = (a.0 - c).hypot(a.1 - c);
                // Explicit Euler on a circle drifts by r dt^2 / 2.
                assert!((r1 - r0).abs() <= 0.5 * r0 * dt * dt * 1.01);
            }
        }
    }

    #[test]
    fn leaving_particles_respawn_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = set(vec![(10.5, 3.0)]);
        let q = advect_particles(&p, &VectorField2D::constant(12, 12, (2.0, 0.0)), 1.0, &mut rng);
        let (x, y) = q.positions[0];
        assert!((0.0..=11.0).contains(&x) && (0.0..=11.0).contains(&y));
    }

    #[test]
    fn sequences_are_seed_deterministic() {
        let flows = vec![VectorField2D::constant(16, 16, (0.5, 0.25)); 3];
        let a = render_sequence(&flows, 30, 1.2, 7).unwrap();
        let b = render_sequence(&flows, 30, 1.2, 7).unwrap();
        let c = render_sequence(&flows, 30, 1.2, 8).unwrap();
        assert_eq!(a.len(), 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
    }
}
