//! Deterministic inputs shared by the benchmarks.

use fluidest::{ScalarField2D, VectorField2D};

/// A smooth, divergent velocity field with a few modes per axis.
pub fn test_flow(n: usize) -> VectorField2D {
    let k = std::f64::consts::TAU / n as f64;
    VectorField2D::from_fn(n, n, |x, y| {
        let (x, y) = (x as f64 * k, y as f64 * k);
        ((2.0 * x).sin() * y.cos() + 0.3 * (3.0 * y).sin(), (x + y).cos() - 0.5 * (2.0 * x).cos())
    })
}

/// A textured image and a copy translated by `(dx, dy)`.
pub fn image_pair(n: usize, dx: f64, dy: f64) -> (ScalarField2D, ScalarField2D) {
    let texture = |x: f64, y: f64| 0.5 + 0.2 * (0.45 * x).sin() * (0.31 * y).cos() + 0.15 * (0.23 * (x + 2.0 * y)).sin();
    (
        ScalarField2D::from_fn(n, n, |x, y| texture(x as f64, y as f64)),
        ScalarField2D::from_fn(n, n, |x, y| texture(x as f64 - dx, y as f64 - dy)),
    )
}
