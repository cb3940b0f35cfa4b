mod common;

use common::{dense_gaussian_warp, random_field, random_flow};
use fluidest::{warp_gaussian, ScalarField2D, VectorField2D, WarpConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Truncation wide enough for the window to cover a whole 16x16 grid.
fn full_window(diffusion: f64, dt: f64) -> WarpConfig {
    let sigma = (2.0 * diffusion * dt).sqrt();
    WarpConfig::new(diffusion, dt).with_truncation((17.0 / sigma).max(3.0))
}

fn max_diff(a: &ScalarField2D, b: &ScalarField2D) -> f64 {
    a.data().iter().zip(b.data()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
}

#[test]
fn impulse_matches_dense_sum_and_frozen_values() {
    let mut f = ScalarField2D::zeros(16, 16);
    f.set(8, 8, 1.0);
    let w = VectorField2D::zeros(16, 16);
    let out = warp_gaussian(&f, &w, &full_window(0.5, 1.0)).unwrap();
    let dense = dense_gaussian_warp(&f, &w, 0.5, 1.0);
    assert!(max_diff(&out, &dense) < 1e-10);
    // The default 4-sigma window renormalizes over 9x9 nodes instead.
    let truncated = warp_gaussian(&f, &w, &WarpConfig::new(0.5, 1.0)).unwrap();
    assert!(max_diff(&truncated, &dense) < 1e-6);
    // Unit-variance Gaussian weights, each output node normalized over the grid.
    let frozen = [
        ((8, 8), 0.159_154_941_388_755_74),
        ((9, 8), 0.096_532_351_597_929_32),
        ((10, 9), 0.013_064_233_224_498_133),
        ((8, 12), 5.339_776_082_871_001e-5),
    ];
    for ((x, y), v) in frozen {
        assert!((out.get(x, y) - v).abs() < 1e-10, "({x},{y}): {} vs {v}", out.get(x, y));
    }
}

#[test]
fn random_cases_match_dense_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for case in 0..20 {
        let f = random_field(16, 16, 0.0, 1.0, 100 + case);
        let w = random_flow(16, 16, 2.5, 200 + case);
        let d = rng.gen_range(0.05..2.0);
        let dt = rng.gen_range(0.5..1.5);
        let out = warp_gaussian(&f, &w, &full_window(d, dt)).unwrap();
        let dense = dense_gaussian_warp(&f, &w, d, dt);
        assert!(max_diff(&out, &dense) < 1e-12, "case {case}");
    }
}

#[test]
fn default_truncation_stays_close_to_dense_sum() {
    let f = random_field(16, 16, 0.0, 1.0, 5);
    let w = random_flow(16, 16, 1.0, 6);
    let out = warp_gaussian(&f, &w, &WarpConfig::new(0.5, 1.0)).unwrap();
    assert!(max_diff(&out, &dense_gaussian_warp(&f, &w, 0.5, 1.0)) < 1e-3);
}

#[test]
fn blur_variances_add() {
    let f = ScalarField2D::from_fn(64, 64, |x, y| (0.2 * x as f64).sin() * (0.15 * y as f64).cos());
    let zero = VectorField2D::zeros(64, 64);
    // A 4-sigma window is only accurate to about 3e-5 here for some widths;
    // wider windows are used where that matters.
    for (d, trunc) in [(0.5, 4.0), (1.0, 6.0), (2.0, 6.0)] {
        let once = warp_gaussian(&f, &zero, &WarpConfig::new(d, 2.0).with_truncation(trunc)).unwrap();
        let half = WarpConfig::new(d, 1.0).with_truncation(trunc);
        let twice = warp_gaussian(&warp_gaussian(&f, &zero, &half).unwrap(), &zero, &half).unwrap();
        let mut worst: f64 = 0.0;
        for y in 20..44 {
            for x in 20..44 {
                worst = worst.max((once.get(x, y) - twice.get(x, y)).abs());
            }
        }
        assert!(worst < 1e-6, "D = {d}: {worst}");
    }
}
