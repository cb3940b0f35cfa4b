//! Grid containers and the finite-difference operators shared by every module.
//!
//! Fields live on a collocated grid with unit spacing. Node `(x, y)` is column
//! `x`, row `y`, stored row-major. All derivative operators are built from one
//! first-derivative stencil ([`diff_weights`]): central differences in the
//! interior and first-order one-sided differences on the boundary ring.

use crate::error::{Error, Result};

/// Smallest grid edge accepted by the differential operators.
pub const MIN_STENCIL_DIM: usize = 3;

/// Highest total order accepted by [`partial_derivative`].
pub const MAX_DERIVATIVE_ORDER: usize = 4;

/// Scalar samples on an `height x width` grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField2D {
    height: usize,
    width: usize,
    data: Vec<f64>,
}

/// Two-component vector samples (`u` along x, `v` along y) on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField2D {
    height: usize,
    width: usize,
    u: Vec<f64>,
    v: Vec<f64>,
}

impl ScalarField2D {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::filled(height, width, 0.0)
    }

    pub fn filled(height: usize, width: usize, value: f64) -> Self {
        Self {
            height,
            width,
            data: vec![value; height * width],
        }
    }

    pub fn from_vec(height: usize, width: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width {
            return Err(Error::InvalidParameter(format!(
                "{} samples supplied for a {height}x{width} grid",
                data.len()
            )));
        }
        Ok(Self {
            height,
            width,
            data,
        })
    }

    /// Builds a field by evaluating `f(x, y)` at every node.
    pub fn from_fn(height: usize, width: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(height * width);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            height,
            width,
            data,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// `(height, width)`.
    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: f64) {
        self.data[y * self.width + x] = value;
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            data: self.data.iter().map(|&a| f(a)).collect(),
        }
    }

    /// Elementwise combination; panics if the dimensions differ.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims(), other.dims(), "field dimensions differ");
        Self {
            height: self.height,
            width: self.width,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.sum() / self.data.len() as f64
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|a| a.is_finite())
    }

    pub fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        check_dims(self.dims(), other)
    }
}

impl VectorField2D {
    pub fn zeros(height: usize, width: usize) -> Self {
        Self::constant(height, width, (0.0, 0.0))
    }

    pub fn constant(height: usize, width: usize, value: (f64, f64)) -> Self {
        Self {
            height,
            width,
            u: vec![value.0; height * width],
            v: vec![value.1; height * width],
        }
    }

    pub fn from_fn(
        height: usize,
        width: usize,
        mut f: impl FnMut(usize, usize) -> (f64, f64),
    ) -> Self {
        let n = height * width;
        let (mut u, mut v) = (Vec::with_capacity(n), Vec::with_capacity(n));
        for y in 0..height {
            for x in 0..width {
                let (a, b) = f(x, y);
                u.push(a);
                v.push(b);
            }
        }
        Self {
            height,
            width,
            u,
            v,
        }
    }

    pub fn from_components(u: ScalarField2D, v: ScalarField2D) -> Result<Self> {
        check_dims(u.dims(), v.dims())?;
        Ok(Self {
            height: u.height,
            width: u.width,
            u: u.data,
            v: v.data,
        })
    }

    pub fn from_vecs(height: usize, width: usize, u: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        Self::from_components(
            ScalarField2D::from_vec(height, width, u)?,
            ScalarField2D::from_vec(height, width, v)?,
        )
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.height, self.width)
    }

    pub fn u(&self) -> &[f64] {
        &self.u
    }

    pub fn v(&self) -> &[f64] {
        &self.v
    }

    pub fn u_mut(&mut self) -> &mut [f64] {
        &mut self.u
    }

    pub fn v_mut(&mut self) -> &mut [f64] {
        &mut self.v
    }

    /// Component plane by index: 0 is `u`, 1 is `v`.
    pub fn component(&self, c: usize) -> &[f64] {
        match c {
            0 => &self.u,
            1 => &self.v,
            _ => panic!("vector fields have two components, got index {c}"),
        }
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [f64] {
        match c {
            0 => &mut self.u,
            1 => &mut self.v,
            _ => panic!("vector fields have two components, got index {c}"),
        }
    }

    pub fn u_field(&self) -> ScalarField2D {
        ScalarField2D {
            height: self.height,
            width: self.width,
            data: self.u.clone(),
        }
    }

    pub fn v_field(&self) -> ScalarField2D {
        ScalarField2D {
            height: self.height,
            width: self.width,
            data: self.v.clone(),
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> (f64, f64) {
        let i = y * self.width + x;
        (self.u[i], self.v[i])
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: (f64, f64)) {
        let i = y * self.width + x;
        self.u[i] = value.0;
        self.v[i] = value.1;
    }

    pub fn scale(&self, s: f64) -> Self {
        self.map(|a| a * s)
    }

    /// Applies `f` to every sample of both components.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            height: self.height,
            width: self.width,
            u: self.u.iter().map(|&a| f(a)).collect(),
            v: self.v.iter().map(|&a| f(a)).collect(),
        }
    }

    /// Componentwise combination; panics if the dimensions differ.
    pub fn zip_map(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        assert_eq!(self.dims(), other.dims(), "field dimensions differ");
        let zip = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&p, &q)| f(p, q)).collect();
        Self {
            height: self.height,
            width: self.width,
            u: zip(&self.u, &other.u),
            v: zip(&self.v, &other.v),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.zip_map(other, |a, b| a - b)
    }

    /// Largest vector magnitude.
    pub fn max_norm(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .fold(0.0, |m, (a, b)| m.max(a.hypot(*b)))
    }

    /// Largest absolute difference over both components.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dims(), other.dims(), "field dimensions differ");
        self.u
            .iter()
            .zip(&other.u)
            .chain(self.v.iter().zip(&other.v))
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Sum of squared magnitudes.
    pub fn energy(&self) -> f64 {
        self.u
            .iter()
            .zip(&self.v)
            .map(|(a, b)| a * a + b * b)
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.v).all(|a| a.is_finite())
    }

    pub fn ensure_same_dims(&self, other: (usize, usize)) -> Result<()> {
        check_dims(self.dims(), other)
    }
}

pub(crate) fn check_dims(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

pub(crate) fn check_min_dims(height: usize, width: usize, min: usize) -> Result<()> {
    if height < min || width < min {
        return Err(Error::DimensionTooSmall { height, width, min });
    }
    Ok(())
}

/// The canonical first-derivative stencil along a line of `n >= 2` samples.
///
/// Returns the two `(index, weight)` taps for node `i`. Forward operators and
/// the adjoints used by the loss gradients both go through this function.
#[inline]
pub(crate) fn diff_weights(n: usize, i: usize) -> [(usize, f64); 2] {
    if i == 0 {
        [(1, 1.0), (0, -1.0)]
    } else if i == n - 1 {
        [(n - 1, 1.0), (n - 2, -1.0)]
    } else {
        [(i + 1, 0.5), (i - 1, -0.5)]
    }
}

/// d/dx of a row-major plane.
pub(crate) fn diff_x(data: &[f64], height: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        let row = &data[y * width..(y + 1) * width];
        for x in 0..width {
            let [(a, wa), (b, wb)] = diff_weights(width, x);
            out[y * width + x] = wa * row[a] + wb * row[b];
        }
    }
    out
}

/// d/dy of a row-major plane.
pub(crate) fn diff_y(data: &[f64], height: usize, width: usize) -> Vec<f64> {
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        let [(a, wa), (b, wb)] = diff_weights(height, y);
        for x in 0..width {
            out[y * width + x] = wa * data[a * width + x] + wb * data[b * width + x];
        }
    }
    out
}

/// Transpose of [`diff_x`] (`axis == 0`) or [`diff_y`] applied to `q`.
pub(crate) fn diff_adjoint(q: &[f64], height: usize, width: usize, axis: usize) -> Vec<f64> {
    let mut out = vec![0.0; q.len()];
    for y in 0..height {
        for x in 0..width {
            let i = y * width + x;
            if axis == 0 {
                for (j, c) in diff_weights(width, x) {
                    out[y * width + j] += c * q[i];
                }
            } else {
                for (j, c) in diff_weights(height, y) {
                    out[j * width + x] += c * q[i];
                }
            }
        }
    }
    out
}

/// `(df/dx, df/dy)` at every node.
pub fn gradient(f: &ScalarField2D) -> Result<VectorField2D> {
    check_min_dims(f.height, f.width, MIN_STENCIL_DIM)?;
    Ok(VectorField2D {
        height: f.height,
        width: f.width,
        u: diff_x(&f.data, f.height, f.width),
        v: diff_y(&f.data, f.height, f.width),
    })
}

/// `du/dx + dv/dy` at every node.
pub fn divergence(w: &VectorField2D) -> Result<ScalarField2D> {
    check_min_dims(w.height, w.width, MIN_STENCIL_DIM)?;
    let mut data = diff_x(&w.u, w.height, w.width);
    for (d, b) in data.iter_mut().zip(diff_y(&w.v, w.height, w.width)) {
        *d += b;
    }
    Ok(ScalarField2D {
        height: w.height,
        width: w.width,
        data,
    })
}

/// Scalar vorticity `dv/dx - du/dy`.
pub fn curl(w: &VectorField2D) -> Result<ScalarField2D> {
    check_min_dims(w.height, w.width, MIN_STENCIL_DIM)?;
    let mut data = diff_x(&w.v, w.height, w.width);
    for (d, b) in data.iter_mut().zip(diff_y(&w.u, w.height, w.width)) {
        *d -= b;
    }
    Ok(ScalarField2D {
        height: w.height,
        width: w.width,
        data,
    })
}

/// Five-point Laplacian. Boundary nodes mirror their inner neighbour into the
/// ghost position (`f[-1] = f[1]`), i.e. a zero normal derivative.
pub fn laplacian(f: &ScalarField2D) -> Result<ScalarField2D> {
    check_min_dims(f.height, f.width, MIN_STENCIL_DIM)?;
    Ok(ScalarField2D {
        height: f.height,
        width: f.width,
        data: laplacian_plane(&f.data, f.height, f.width),
    })
}

pub(crate) fn laplacian_plane(data: &[f64], height: usize, width: usize) -> Vec<f64> {
    let reflect = |i: isize, n: usize| -> usize {
        if i < 0 {
            (-i) as usize
        } else if i as usize >= n {
            2 * (n - 1) - i as usize
        } else {
            i as usize
        }
    };
    let mut out = vec![0.0; data.len()];
    for y in 0..height {
        let ym = reflect(y as isize - 1, height);
        let yp = reflect(y as isize + 1, height);
        for x in 0..width {
            let xm = reflect(x as isize - 1, width);
            let xp = reflect(x as isize + 1, width);
            let c = data[y * width + x];
            out[y * width + x] = data[y * width + xm]
                + data[y * width + xp]
                + data[ym * width + x]
                + data[yp * width + x]
                - 4.0 * c;
        }
    }
    out
}

/// Mixed derivative `d^(i+j) f / dx^i dy^j`, built by repeating the canonical
/// first-derivative stencil `i` times along x and `j` times along y.
pub fn partial_derivative(f: &ScalarField2D, i: usize, j: usize) -> Result<ScalarField2D> {
    let order = i + j;
    if order > MAX_DERIVATIVE_ORDER {
        return Err(Error::OrderTooHigh {
            order,
            max: MAX_DERIVATIVE_ORDER,
        });
    }
    if order == 0 {
        return Ok(f.clone());
    }
    // Every pass needs at least one interior node beyond the taps it reads.
    let min = MIN_STENCIL_DIM.max(2 * i.max(j) + 1);
    check_min_dims(f.height, f.width, min)?;
    let mut data = f.data.clone();
    for _ in 0..i {
        data = diff_x(&data, f.height, f.width);
    }
    for _ in 0..j {
        data = diff_y(&data, f.height, f.width);
    }
    Ok(ScalarField2D {
        height: f.height,
        width: f.width,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn interior(h: usize, w: usize) -> impl Iterator<Item = (usize, usize)> {
        (1..h - 1).flat_map(move |y| (1..w - 1).map(move |x| (x, y)))
    }

    #[test]
    fn gradient_of_constant_is_zero() {
        let g = gradient(&ScalarField2D::filled(5, 6, 7.0)).unwrap();
        assert_eq!(g.max_norm(), 0.0);
    }

    #[test]
    fn gradient_exact_on_affine_everywhere() {
        let f = ScalarField2D::from_fn(6, 7, |x, y| 3.0 * x as f64 - 2.0 * y as f64 + 1.0);
        let g = gradient(&f).unwrap();
        for y in 0..6 {
            for x in 0..7 {
                assert_eq!(g.get(x, y), (3.0, -2.0));
            }
        }
        let fx = ScalarField2D::from_fn(5, 5, |x, _| x as f64);
        let gx = gradient(&fx).unwrap();
        for (x, y) in interior(5, 5) {
            assert_eq!(gx.get(x, y), (1.0, 0.0));
        }
    }

    #[test]
    fn gradient_of_square_at_two() {
        // (f(3) - f(1)) / 2 = (9 - 1) / 2
        let f = ScalarField2D::from_fn(5, 6, |x, _| (x * x) as f64);
        assert_eq!(gradient(&f).unwrap().get(2, 2).0, 4.0);
    }

    #[test]
    fn too_small_grids_are_rejected() {
        let f = ScalarField2D::zeros(2, 5);
        assert!(matches!(
            gradient(&f),
            Err(Error::DimensionTooSmall { min: 3, .. })
        ));
        assert!(divergence(&VectorField2D::zeros(5, 2)).is_err());
        assert!(curl(&VectorField2D::zeros(2, 2)).is_err());
        assert!(laplacian(&ScalarField2D::zeros(1, 9)).is_err());
    }

    #[test]
    fn divergence_examples() {
        let c = VectorField2D::constant(5, 5, (3.0, -2.0));
        assert_eq!(divergence(&c).unwrap().max_abs(), 0.0);
        let radial = VectorField2D::from_fn(6, 6, |x, y| (x as f64, y as f64));
        let rot = VectorField2D::from_fn(6, 6, |x, y| (-(y as f64), x as f64));
        let dr = divergence(&radial).unwrap();
        let dt = divergence(&rot).unwrap();
        for (x, y) in interior(6, 6) {
            assert_eq!(dr.get(x, y), 2.0);
            assert_eq!(dt.get(x, y), 0.0);
        }
    }

    #[test]
    fn curl_examples() {
        let rot = VectorField2D::from_fn(6, 5, |x, y| (-(y as f64), x as f64));
        let shear = VectorField2D::from_fn(6, 5, |_, y| (y as f64, 0.0));
        let (cr, cs) = (curl(&rot).unwrap(), curl(&shear).unwrap());
        for (x, y) in interior(6, 5) {
            assert_eq!(cr.get(x, y), 2.0);
            assert_eq!(cs.get(x, y), -1.0);
        }
        assert_eq!(
            curl(&VectorField2D::constant(4, 4, (1.0, 9.0)))
                .unwrap()
                .max_abs(),
            0.0
        );
    }

    #[test]
    fn laplacian_examples() {
        let affine = ScalarField2D::from_fn(6, 6, |x, y| 2.0 * x as f64 + y as f64);
        let quad = ScalarField2D::from_fn(6, 6, |x, y| (x * x + y * y) as f64);
        let (la, lq) = (laplacian(&affine).unwrap(), laplacian(&quad).unwrap());
        for (x, y) in interior(6, 6) {
            assert_eq!(la.get(x, y), 0.0);
            assert_eq!(lq.get(x, y), 4.0);
        }
    }

    #[test]
    fn laplacian_of_sine_matches_analytic_second_derivative() {
        let w = 64;
        let k = 2.0 * std::f64::consts::PI / w as f64;
        let f = ScalarField2D::from_fn(8, w, |x, _| (k * x as f64).sin());
        let lf = laplacian(&f).unwrap();
        for (x, y) in interior(8, w) {
            let exact = -k * k * f.get(x, y);
            // Five-point truncation error is k^4/12 relative to k^2.
            assert!((lf.get(x, y) - exact).abs() <= k * k * k * k / 12.0 * 1.01 + 1e-15);
        }
    }

    #[test]
    fn laplacian_reflects_at_boundary() {
        // f = x^2 mirrored about node 0 gives 2 * (f(1) - f(0)) = 2.
        let f = ScalarField2D::from_fn(5, 5, |x, _| (x * x) as f64);
        assert_eq!(laplacian(&f).unwrap().get(0, 2), 2.0);
    }

    #[test]
    fn partial_derivative_examples() {
        let f = ScalarField2D::from_fn(7, 7, |x, y| (x * y) as f64);
        assert_eq!(partial_derivative(&f, 0, 0).unwrap(), f);
        let fxy = partial_derivative(&f, 1, 1).unwrap();
        for (x, y) in interior(7, 7) {
            assert_eq!(fxy.get(x, y), 1.0);
        }
        let c = ScalarField2D::filled(9, 9, 2.5);
        for (i, j) in [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 2), (1, 3)] {
            assert_eq!(partial_derivative(&c, i, j).unwrap().max_abs(), 0.0);
        }
        assert!(matches!(
            partial_derivative(&c, 3, 2),
            Err(Error::OrderTooHigh { order: 5, .. })
        ));
        assert!(matches!(
            partial_derivative(&ScalarField2D::zeros(4, 4), 2, 0),
            Err(Error::DimensionTooSmall { .. })
        ));
    }

    #[test]
    fn central_composition_is_the_spacing_two_laplacian() {
        // div(grad f) composes two central differences, giving the stride-2
        // five-point stencil wherever neither pass touches the boundary ring.
        let f = ScalarField2D::from_fn(9, 10, |x, y| ((x * 7 + y * 3) % 5) as f64 * 0.3);
        let dg = divergence(&gradient(&f).unwrap()).unwrap();
        for y in 2..7 {
            for x in 2..8 {
                let wide = (f.get(x + 2, y) + f.get(x - 2, y) + f.get(x, y + 2) + f.get(x, y - 2)
                    - 4.0 * f.get(x, y))
                    / 4.0;
                assert!((dg.get(x, y) - wide).abs() < 1e-14);
            }
        }
        // On quadratics both discretisations are exact and agree with laplacian().
        let q = ScalarField2D::from_fn(9, 9, |x, y| 0.5 * (x * x) as f64 - 1.5 * (y * y) as f64);
        let (dq, lq) = (
            divergence(&gradient(&q).unwrap()).unwrap(),
            laplacian(&q).unwrap(),
        );
        for y in 2..7 {
            for x in 2..7 {
                assert!((dq.get(x, y) - lq.get(x, y)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn adjoint_satisfies_inner_product_identity() {
        let (h, w) = (5, 7);
        let a: Vec<f64> = (0..h * w).map(|i| ((i * 37) % 11) as f64 - 5.0).collect();
        let b: Vec<f64> = (0..h * w).map(|i| ((i * 13) % 7) as f64 * 0.5).collect();
        let dot = |p: &[f64], q: &[f64]| p.iter().zip(q).map(|(x, y)| x * y).sum::<f64>();
        assert!((dot(&diff_x(&a, h, w), &b) - dot(&a, &diff_adjoint(&b, h, w, 0))).abs() < 1e-12);
        assert!((dot(&diff_y(&a, h, w), &b) - dot(&a, &diff_adjoint(&b, h, w, 1))).abs() < 1e-12);
    }

    fn field(h: usize, w: usize) -> impl Strategy<Value = ScalarField2D> {
        proptest::collection::vec(-10.0f64..10.0, h * w)
            .prop_map(move |d| ScalarField2D::from_vec(h, w, d).unwrap())
    }

    proptest! {
        #[test]
        fn operators_are_linear(f in field(6, 7), g in field(6, 7), a in -3.0f64..3.0, b in -3.0f64..3.0) {
            let combo = f.zip_map(&g, |p, q| a * p + b * q);
            let lin = |x: &[f64], y: &[f64], z: &[f64]| {
                x.iter().zip(y).zip(z).all(|((o, p), q)| (o - (a * p + b * q)).abs() < 1e-11)
            };
            let (gc, gf, gg) = (gradient(&combo).unwrap(), gradient(&f).unwrap(), gradient(&g).unwrap());
            prop_assert!(lin(gc.u(), gf.u(), gg.u()) && lin(gc.v(), gf.v(), gg.v()));
            let (lc, lf, lg) = (laplacian(&combo).unwrap(), laplacian(&f).unwrap(), laplacian(&g).unwrap());
            prop_assert!(lin(lc.data(), lf.data(), lg.data()));
            let pc = partial_derivative(&combo, 1, 1).unwrap();
            let pf = partial_derivative(&f, 1, 1).unwrap();
            let pg = partial_derivative(&g, 1, 1).unwrap();
            prop_assert!(lin(pc.data(), pf.data(), pg.data()));
            let vc = VectorField2D::from_components(combo.clone(), f.clone()).unwrap();
            let vf = VectorField2D::from_components(f.clone(), g.clone()).unwrap();
            let vg = VectorField2D::from_components(g.clone(), combo.clone()).unwrap();
            // div/curl linearity on a linear combination of vector fields
            let mix = vf.zip_map(&vg, |p, q| a * p + b * q);
            let (dm, df, dg) = (divergence(&mix).unwrap(), divergence(&vf).unwrap(), divergence(&vg).unwrap());
            prop_assert!(lin(dm.data(), df.data(), dg.data()));
            let (cm, cf, cg) = (curl(&mix).unwrap(), curl(&vf).unwrap(), curl(&vg).unwrap());
            prop_assert!(lin(cm.data(), cf.data(), cg.data()));
            let _ = vc;
        }

        #[test]
        fn curl_of_gradient_vanishes(f in field(7, 8)) {
            let c = curl(&gradient(&f).unwrap()).unwrap();
            prop_assert!(c.max_abs() < 1e-12);
        }
    }
}
