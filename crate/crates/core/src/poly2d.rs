//! Exact bivariate polynomials `sum c_ij x^i y^j` and the manufactured
//! Stokes solutions built from a polynomial stream function.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Var {
    X,
    Y,
}

/// Dense polynomial in two variables with tight degree bounds.
///
/// Coefficient `c_ij` multiplies `x^i y^j` and is stored at
/// `i * (degree_y + 1) + j`.
#[derive(Clone, PartialEq)]
pub struct BivariatePoly {
    coeffs: Vec<f64>,
    degree_x: usize,
    degree_y: usize,
}

impl BivariatePoly {
    /// Builds a polynomial from a row-major `(degree_x+1) x (degree_y+1)`
    /// coefficient grid and trims zero top rows/columns.
    ///
    /// Panics if `coeffs.len()` does not match the stated degrees.
    pub fn from_coeffs(degree_x: usize, degree_y: usize, coeffs: Vec<f64>) -> Self {
        assert_eq!(
            coeffs.len(),
            (degree_x + 1) * (degree_y + 1),
            "coefficient grid does not match degrees"
        );
        let mut p = Self {
            coeffs,
            degree_x,
            degree_y,
        };
        p.trim();
        p
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn constant(c: f64) -> Self {
        Self {
            coeffs: vec![c],
            degree_x: 0,
            degree_y: 0,
        }
    }

    pub fn monomial(i: usize, j: usize, c: f64) -> Self {
        let mut coeffs = vec![0.0; (i + 1) * (j + 1)];
        coeffs[i * (j + 1) + j] = c;
        Self::from_coeffs(i, j, coeffs)
    }

    /// Polynomial in `x` only, `coeffs[i]` multiplying `x^i`.
    pub fn in_x(coeffs: &[f64]) -> Self {
        let n = coeffs.len().max(1);
        let mut c = coeffs.to_vec();
        c.resize(n, 0.0);
        Self::from_coeffs(n - 1, 0, c)
    }

    /// Polynomial in `y` only, `coeffs[j]` multiplying `y^j`.
    pub fn in_y(coeffs: &[f64]) -> Self {
        let n = coeffs.len().max(1);
        let mut c = coeffs.to_vec();
        c.resize(n, 0.0);
        Self::from_coeffs(0, n - 1, c)
    }

    pub fn degree_x(&self) -> usize {
        self.degree_x
    }

    pub fn degree_y(&self) -> usize {
        self.degree_y
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `x^i y^j`, zero outside the stored grid.
    pub fn coeff(&self, i: usize, j: usize) -> f64 {
        if i > self.degree_x || j > self.degree_y {
            0.0
        } else {
            self.coeffs[i * (self.degree_y + 1) + j]
        }
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    fn trim(&mut self) {
        let ny = self.degree_y + 1;
        let mut dx = self.degree_x;
        while dx > 0 && (0..ny).all(|j| self.coeffs[dx * ny + j] == 0.0) {
            dx -= 1;
        }
        let mut dy = self.degree_y;
        while dy > 0 && (0..=dx).all(|i| self.coeffs[i * ny + dy] == 0.0) {
            dy -= 1;
        }
        if dx != self.degree_x || dy != self.degree_y {
            let mut c = Vec::with_capacity((dx + 1) * (dy + 1));
            for i in 0..=dx {
                c.extend_from_slice(&self.coeffs[i * ny..i * ny + dy + 1]);
            }
            self.coeffs = c;
            self.degree_x = dx;
            self.degree_y = dy;
        }
    }

    /// Exact partial derivative.
    pub fn differentiate(&self, var: Var) -> Self {
        let (dx, dy) = (self.degree_x, self.degree_y);
        match var {
            Var::X => {
                if dx == 0 {
                    return Self::zero();
                }
                let mut c = vec![0.0; dx * (dy + 1)];
                for i in 1..=dx {
                    for j in 0..=dy {
                        c[(i - 1) * (dy + 1) + j] = i as f64 * self.coeff(i, j);
                    }
                }
                Self::from_coeffs(dx - 1, dy, c)
            }
            Var::Y => {
                if dy == 0 {
                    return Self::zero();
                }
                let mut c = vec![0.0; (dx + 1) * dy];
                for i in 0..=dx {
                    for j in 1..=dy {
                        c[i * dy + j - 1] = j as f64 * self.coeff(i, j);
                    }
                }
                Self::from_coeffs(dx, dy - 1, c)
            }
        }
    }

    pub fn laplacian(&self) -> Self {
        let xx = self.differentiate(Var::X).differentiate(Var::X);
        let yy = self.differentiate(Var::Y).differentiate(Var::Y);
        &xx + &yy
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coeffs(
            self.degree_x,
            self.degree_y,
            self.coeffs.iter().map(|c| c * s).collect(),
        )
    }

    /// Horner evaluation, outer loop in `x`.
    pub fn evaluate(&self, x: f64, y: f64) -> f64 {
        let ny = self.degree_y + 1;
        let mut acc = 0.0;
        for i in (0..=self.degree_x).rev() {
            let row = &self.coeffs[i * ny..(i + 1) * ny];
            let inner = row.iter().rev().fold(0.0, |a, &c| a * y + c);
            acc = acc * x + inner;
        }
        acc
    }

    /// Evaluates a partial derivative without building the derivative
    /// polynomial.
    pub fn evaluate_partial(&self, var: Var, x: f64, y: f64) -> f64 {
        let ny = self.degree_y + 1;
        match var {
            Var::X => {
                let mut acc = 0.0;
                for i in (1..=self.degree_x).rev() {
                    let row = &self.coeffs[i * ny..(i + 1) * ny];
                    let inner = row.iter().rev().fold(0.0, |a, &c| a * y + c);
                    acc = acc * x + i as f64 * inner;
                }
                acc
            }
            Var::Y => {
                let mut acc = 0.0;
                for i in (0..=self.degree_x).rev() {
                    let row = &self.coeffs[i * ny..(i + 1) * ny];
                    let inner = row
                        .iter()
                        .enumerate()
                        .skip(1)
                        .rev()
                        .fold(0.0, |a, (j, &c)| a * y + j as f64 * c);
                    acc = acc * x + inner;
                }
                acc
            }
        }
    }

    pub fn gradient(&self, x: f64, y: f64) -> [f64; 2] {
        [
            self.evaluate_partial(Var::X, x, y),
            self.evaluate_partial(Var::Y, x, y),
        ]
    }

    /// Exact integral over `[x0,x1] x [y0,y1]`.
    pub fn integrate_rect(&self, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
        let mut total = 0.0;
        for i in 0..=self.degree_x {
            let ix = (x1.powi(i as i32 + 1) - x0.powi(i as i32 + 1)) / (i as f64 + 1.0);
            for j in 0..=self.degree_y {
                let c = self.coeff(i, j);
                if c != 0.0 {
                    let iy = (y1.powi(j as i32 + 1) - y0.powi(j as i32 + 1)) / (j as f64 + 1.0);
                    total += c * ix * iy;
                }
            }
        }
        total
    }

    /// `sum c_ij / ((i+1)(j+1))`.
    pub fn integrate_unit_square(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..=self.degree_x {
            for j in 0..=self.degree_y {
                total += self.coeff(i, j) / ((i + 1) as f64 * (j + 1) as f64);
            }
        }
        total
    }

    /// Largest absolute coefficient of `self - other`.
    pub fn max_coeff_diff(&self, other: &Self) -> f64 {
        let dx = self.degree_x.max(other.degree_x);
        let dy = self.degree_y.max(other.degree_y);
        let mut m = 0.0f64;
        for i in 0..=dx {
            for j in 0..=dy {
                m = m.max((self.coeff(i, j) - other.coeff(i, j)).abs());
            }
        }
        m
    }

    fn combine(&self, other: &Self, s: f64) -> Self {
        let dx = self.degree_x.max(other.degree_x);
        let dy = self.degree_y.max(other.degree_y);
        let mut c = vec![0.0; (dx + 1) * (dy + 1)];
        for i in 0..=dx {
            for j in 0..=dy {
                c[i * (dy + 1) + j] = self.coeff(i, j) + s * other.coeff(i, j);
            }
        }
        Self::from_coeffs(dx, dy, c)
    }

    pub fn multiply(&self, other: &Self) -> Self {
        let dx = self.degree_x + other.degree_x;
        let dy = self.degree_y + other.degree_y;
        let mut c = vec![0.0; (dx + 1) * (dy + 1)];
        for i in 0..=self.degree_x {
            for j in 0..=self.degree_y {
                let a = self.coeff(i, j);
                if a == 0.0 {
                    continue;
                }
                for k in 0..=other.degree_x {
                    for l in 0..=other.degree_y {
                        c[(i + k) * (dy + 1) + j + l] += a * other.coeff(k, l);
                    }
                }
            }
        }
        Self::from_coeffs(dx, dy, c)
    }

    pub fn powi(&self, n: u32) -> Self {
        (0..n).fold(Self::constant(1.0), |acc, _| acc.multiply(self))
    }
}

impl fmt::Debug for BivariatePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut terms = Vec::new();
        for i in 0..=self.degree_x {
            for j in 0..=self.degree_y {
                let c = self.coeff(i, j);
                if c != 0.0 {
                    terms.push(format!("{c}*x^{i}*y^{j}"));
                }
            }
        }
        if terms.is_empty() {
            write!(f, "0")
        } else {
            write!(f, "{}", terms.join(" + "))
        }
    }
}

impl Add for &BivariatePoly {
    type Output = BivariatePoly;
    fn add(self, rhs: Self) -> BivariatePoly {
        self.combine(rhs, 1.0)
    }
}

impl Sub for &BivariatePoly {
    type Output = BivariatePoly;
    fn sub(self, rhs: Self) -> BivariatePoly {
        self.combine(rhs, -1.0)
    }
}

impl Mul for &BivariatePoly {
    type Output = BivariatePoly;
    fn mul(self, rhs: Self) -> BivariatePoly {
        self.multiply(rhs)
    }
}

impl Neg for &BivariatePoly {
    type Output = BivariatePoly;
    fn neg(self) -> BivariatePoly {
        self.scale(-1.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolutionVariant {
    /// `g = 2^8 (x^3 - x^4)^2 (y^3 - y^4)^2`
    Asymmetric,
    /// `g = 2^8 (x - x^2)^2 (y - y^2)^2`
    Symmetric,
}

/// Exact Stokes data derived from a stream function `g`:
/// `u = curl g = (g_y, -g_x)`, `p = lap g` (mean removed),
/// `f = -lap u + grad p`.
#[derive(Clone, Debug)]
pub struct StokesManufactured {
    pub g: BivariatePoly,
    pub u1: BivariatePoly,
    pub u2: BivariatePoly,
    pub p: BivariatePoly,
    pub f1: BivariatePoly,
    pub f2: BivariatePoly,
}

impl StokesManufactured {
    pub fn from_stream_function(g: BivariatePoly) -> Self {
        let u1 = g.differentiate(Var::Y);
        let u2 = -&g.differentiate(Var::X);
        let lap = g.laplacian();
        let mean = lap.integrate_unit_square();
        let p = &lap - &BivariatePoly::constant(mean);
        let f1 = &(-&u1.laplacian()) + &p.differentiate(Var::X);
        let f2 = &(-&u2.laplacian()) + &p.differentiate(Var::Y);
        Self {
            g,
            u1,
            u2,
            p,
            f1,
            f2,
        }
    }

    /// `div u` as a polynomial; identically zero by construction.
    pub fn divergence(&self) -> BivariatePoly {
        &self.u1.differentiate(Var::X) + &self.u2.differentiate(Var::Y)
    }
}

/// Stream function of the requested variant, scaled by `2^8`.
pub fn stream_function(variant: SolutionVariant) -> BivariatePoly {
    let (x_factor, y_factor) = match variant {
        // t^3 - t^4
        SolutionVariant::Asymmetric => (
            BivariatePoly::in_x(&[0.0, 0.0, 0.0, 1.0, -1.0]),
            BivariatePoly::in_y(&[0.0, 0.0, 0.0, 1.0, -1.0]),
        ),
        // t - t^2
        SolutionVariant::Symmetric => (
            BivariatePoly::in_x(&[0.0, 1.0, -1.0]),
            BivariatePoly::in_y(&[0.0, 1.0, -1.0]),
        ),
    };
    x_factor
        .powi(2)
        .multiply(&y_factor.powi(2))
        .scale(256.0)
}

pub fn make_manufactured(variant: SolutionVariant) -> StokesManufactured {
    StokesManufactured::from_stream_function(stream_function(variant))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn x() -> BivariatePoly {
        BivariatePoly::monomial(1, 0, 1.0)
    }

    fn y() -> BivariatePoly {
        BivariatePoly::monomial(0, 1, 1.0)
    }

    #[test]
    fn power_rule_and_constants() {
        let x2y = BivariatePoly::monomial(2, 1, 1.0);
        let d = x2y.differentiate(Var::X);
        assert_eq!(d, BivariatePoly::monomial(1, 1, 2.0));
        assert!(BivariatePoly::constant(5.0).differentiate(Var::Y).is_zero());
        let zero = BivariatePoly::zero();
        assert_eq!((zero.degree_x(), zero.degree_y()), (0, 0));
    }

    #[test]
    fn stream_function_derivative_at_center() {
        let g = stream_function(SolutionVariant::Asymmetric);
        let gx = g.differentiate(Var::X);
        assert!((gx.evaluate(0.5, 0.5) - 0.03125).abs() < 1e-15);
        assert!((g.evaluate_partial(Var::X, 0.5, 0.5) - 0.03125).abs() < 1e-15);
    }

    #[test]
    fn products() {
        assert_eq!(&x() * &y(), BivariatePoly::monomial(1, 1, 1.0));
        let a = BivariatePoly::in_x(&[0.0, 0.0, 0.0, 1.0, -1.0]);
        let sq = &a * &a;
        let expect = BivariatePoly::in_x(&[0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0, -2.0, 1.0]);
        assert_eq!(sq, expect);
        let z = &a * &BivariatePoly::zero();
        assert!(z.is_zero());
        assert_eq!((z.degree_x(), z.degree_y()), (0, 0));
    }

    #[test]
    fn evaluation() {
        assert_eq!((&x() * &y()).evaluate(2.0, 3.0), 6.0);
        let g = stream_function(SolutionVariant::Asymmetric);
        for &yy in &[0.0, 0.3, 0.77, 1.0] {
            assert_eq!(g.evaluate(0.0, yy), 0.0);
        }
        let lap = g.laplacian();
        assert!((lap.evaluate(0.5, 0.5) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn trimming_keeps_degrees_tight() {
        let p = BivariatePoly::from_coeffs(2, 2, vec![1.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!((p.degree_x(), p.degree_y()), (1, 0));
        assert_eq!(p.coeffs().len(), 2);
        let c = &x() - &x();
        assert!(c.is_zero());
        assert_eq!((c.degree_x(), c.degree_y()), (0, 0));
    }

    #[test]
    fn manufactured_asymmetric() {
        let m = make_manufactured(SolutionVariant::Asymmetric);
        assert!((m.u1.evaluate(0.5, 0.5) - 0.03125).abs() < 1e-15);
        assert!(m.divergence().is_zero());
        // lap g integrates to zero since g and grad g vanish on the boundary;
        // monomial coefficients reach ~1e4, so the sums cancel to ~1e-12
        assert!(m.g.laplacian().integrate_unit_square().abs() < 1e-11);
        assert!(m.p.integrate_unit_square().abs() < 1e-11);
        assert!((m.p.evaluate(0.5, 0.5) - 0.25).abs() < 1e-11);
    }

    #[test]
    fn manufactured_relations_hold_coefficientwise() {
        for variant in [SolutionVariant::Asymmetric, SolutionVariant::Symmetric] {
            let m = make_manufactured(variant);
            assert_eq!(m.u1.max_coeff_diff(&m.g.differentiate(Var::Y)), 0.0);
            assert_eq!(m.u2.max_coeff_diff(&-&m.g.differentiate(Var::X)), 0.0);
            let f1 = &(-&m.u1.laplacian()) + &m.p.differentiate(Var::X);
            let f2 = &(-&m.u2.laplacian()) + &m.p.differentiate(Var::Y);
            assert_eq!(m.f1.max_coeff_diff(&f1), 0.0);
            assert_eq!(m.f2.max_coeff_diff(&f2), 0.0);
            assert!(m.divergence().is_zero());
        }
    }

    #[test]
    fn divergence_vanishes_pointwise() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for variant in [SolutionVariant::Asymmetric, SolutionVariant::Symmetric] {
            let m = make_manufactured(variant);
            for _ in 0..100 {
                let (px, py) = (rng.gen::<f64>(), rng.gen::<f64>());
                let div = m.u1.evaluate_partial(Var::X, px, py) + m.u2.evaluate_partial(Var::Y, px, py);
                assert!(div.abs() <= 1e-12, "div = {div}");
            }
        }
    }

    fn small_poly() -> impl Strategy<Value = BivariatePoly> {
        (0usize..4, 0usize..4).prop_flat_map(|(dx, dy)| {
            prop::collection::vec(-3i32..=3, (dx + 1) * (dy + 1))
                .prop_map(move |c| BivariatePoly::from_coeffs(dx, dy, c.into_iter().map(f64::from).collect()))
        })
    }

    proptest! {
        #[test]
        fn product_rule(p in small_poly(), q in small_poly(), wrt_x in any::<bool>()) {
            let v = if wrt_x { Var::X } else { Var::Y };
            let lhs = p.multiply(&q).differentiate(v);
            let rhs = &p.differentiate(v).multiply(&q) + &p.multiply(&q.differentiate(v));
            prop_assert!(lhs.max_coeff_diff(&rhs) == 0.0);
        }

        #[test]
        fn partial_evaluation_matches_derivative(p in small_poly(), x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let dx = p.differentiate(Var::X).evaluate(x, y);
            let dy = p.differentiate(Var::Y).evaluate(x, y);
            prop_assert!((p.evaluate_partial(Var::X, x, y) - dx).abs() < 1e-12);
            prop_assert!((p.evaluate_partial(Var::Y, x, y) - dy).abs() < 1e-12);
        }
    }
}
