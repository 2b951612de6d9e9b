//! Exact Gaussian moments of normally ordered polynomials in b, b†.
//!
//! Operators are kept as Σ c_{mn} b†^m b^n. Products are re-normal-ordered
//! with b^n b†^p = Σ_k k! C(n,k) C(p,k) b†^{p−k} b^{n−k}; expectations
//! use Wick's theorem with normal-ordered contractions
//! ⟨δb†δb⟩ = N, ⟨δbδb⟩ = M, ⟨δb†δb†⟩ = M̄ around the mean α = ⟨b⟩.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::gaussian::GaussianState;

/// Default highest total degree the engine evaluates.
pub const DEFAULT_MAX_ORDER: usize = 12;

fn binomial(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * f64::from(n - i) / f64::from(i + 1))
}

fn factorial(n: u32) -> f64 {
    (1..=n).fold(1.0, |acc, i| acc * f64::from(i))
}

/// (k − 1)!! with the convention (−1)!! = 1.
fn double_factorial_odd(k: u32) -> f64 {
    let mut acc = 1.0;
    let mut j = k.saturating_sub(1);
    while j > 1 {
        acc *= f64::from(j);
        j -= 2;
    }
    acc
}

/// Normally ordered polynomial: (m, n) ↦ coefficient of b†^m b^n.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NormalPoly {
    terms: BTreeMap<(u32, u32), Complex64>,
}

impl NormalPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn monomial(m: u32, n: u32, coeff: Complex64) -> Self {
        let mut p = Self::zero();
        p.add_term(m, n, coeff);
        p
    }

    pub fn identity() -> Self {
        Self::monomial(0, 0, Complex64::new(1.0, 0.0))
    }

    /// b†b
    pub fn number() -> Self {
        Self::monomial(1, 1, Complex64::new(1.0, 0.0))
    }

    fn add_term(&mut self, m: u32, n: u32, coeff: Complex64) {
        let slot = self.terms.entry((m, n)).or_insert(Complex64::new(0.0, 0.0));
        *slot += coeff;
        if *slot == Complex64::new(0.0, 0.0) {
            self.terms.remove(&(m, n));
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&(u32, u32), &Complex64)> {
        self.terms.iter()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Highest total degree m + n.
    pub fn degree(&self) -> usize {
        self.terms
            .keys()
            .map(|&(m, n)| (m + n) as usize)
            .max()
            .unwrap_or(0)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero();
        for (&(m, n), &c) in &self.terms {
            out.add_term(m, n, c * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        for (&(m, n), &c) in &other.terms {
            out.add_term(m, n, c);
        }
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(m, n), &c1) in &self.terms {
            for (&(p, q), &c2) in &other.terms {
                for k in 0..=n.min(p) {
                    let w = factorial(k) * binomial(n, k) * binomial(p, k);
                    out.add_term(m + p - k, n + q - k, c1 * c2 * w);
                }
            }
        }
        out
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for (&(m, n), &c) in &self.terms {
            out.add_term(n, m, c.conj());
        }
        out
    }
}

/// First and normal-ordered second moments of a single bosonic mode.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeMoments {
    /// ⟨b⟩
    pub alpha: Complex64,
    /// ⟨δb† δb⟩
    pub n: f64,
    /// ⟨δb δb⟩
    pub m: Complex64,
}

impl ModeMoments {
    /// With b = (q + ip)/√2: ⟨δb†δb⟩ = (C11 + C22 − 1)/2 and
    /// ⟨δbδb⟩ = (C11 − C22 + 2i C12)/2.
    pub fn from_state(st: &GaussianState) -> Self {
        let c = &st.cov;
        ModeMoments {
            alpha: Complex64::new(st.mean[0], st.mean[1]) * FRAC_1_SQRT_2,
            n: 0.5 * (c[(0, 0)] + c[(1, 1)] - 1.0),
            m: Complex64::new(0.5 * (c[(0, 0)] - c[(1, 1)]), c[(0, 1)]),
        }
    }

    /// ⟨δb†^i δb^j⟩ by summing over pairings.
    fn fluctuation(&self, i: u32, j: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for t in 0..=i.min(j) {
            let (ri, rj) = (i - t, j - t);
            if ri % 2 != 0 || rj % 2 != 0 {
                continue;
            }
            let ways = binomial(i, t)
                * binomial(j, t)
                * factorial(t)
                * double_factorial_odd(ri)
                * double_factorial_odd(rj);
            acc +=
                self.m.conj().powu(ri / 2) * self.m.powu(rj / 2) * (ways * self.n.powi(t as i32));
        }
        acc
    }

    /// ⟨b†^m b^n⟩
    pub fn normal_moment(&self, m: u32, n: u32) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        let abar = self.alpha.conj();
        for i in 0..=m {
            for j in 0..=n {
                let w = binomial(m, i) * binomial(n, j);
                acc += abar.powu(m - i) * self.alpha.powu(n - j) * self.fluctuation(i, j) * w;
            }
        }
        acc
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEngine {
    pub state: GaussianState,
    pub max_order: usize,
    moments: ModeMoments,
}

impl MomentEngine {
    pub fn new(state: GaussianState) -> Self {
        Self::with_max_order(state, DEFAULT_MAX_ORDER)
    }

    pub fn with_max_order(state: GaussianState, max_order: usize) -> Self {
        MomentEngine {
            state,
            max_order,
            moments: ModeMoments::from_state(&state),
        }
    }

    pub fn moments(&self) -> &ModeMoments {
        &self.moments
    }

    pub fn expect(&self, poly: &NormalPoly) -> Result<Complex64> {
        let required = poly.degree();
        if required > self.max_order {
            return Err(Error::Order {
                required,
                max_order: self.max_order,
            });
        }
        Ok(poly
            .terms()
            .map(|(&(m, n), &c)| c * self.moments.normal_moment(m, n))
            .sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn b() -> NormalPoly {
        NormalPoly::monomial(0, 1, c(1.0))
    }

    fn bdag() -> NormalPoly {
        NormalPoly::monomial(1, 0, c(1.0))
    }

    #[test]
    fn commutator() {
        let comm = b().mul(&bdag()).sub(&bdag().mul(&b()));
        assert_eq!(comm, NormalPoly::identity());
    }

    #[test]
    fn number_squared() {
        let n = NormalPoly::number();
        let expected = NormalPoly::monomial(2, 2, c(1.0)).add(&NormalPoly::number());
        assert_eq!(n.mul(&n), expected);
    }

    #[test]
    fn vacuum_number_is_zero() {
        let e = MomentEngine::new(GaussianState::vacuum());
        assert_eq!(e.expect(&NormalPoly::number()).unwrap(), c(0.0));
    }

    #[test]
    fn thermal_moments() {
        let nbar = 1.7;
        let st = GaussianState::new(Vector2::zeros(), Matrix2::identity() * (nbar + 0.5));
        let e = MomentEngine::new(st);
        let n = NormalPoly::number();
        let n2 = e.expect(&n.mul(&n)).unwrap().re;
        // Bose-Einstein: ⟨n²⟩ = 2n̄² + n̄
        assert!((n2 - (2.0 * nbar * nbar + nbar)).abs() < 1e-12);
        let n3 = e.expect(&n.mul(&n).mul(&n)).unwrap().re;
        // ⟨n³⟩ = 6n̄³ + 6n̄² + n̄
        assert!((n3 - (6.0 * nbar.powi(3) + 6.0 * nbar * nbar + nbar)).abs() < 1e-10);
    }

    #[test]
    fn coherent_state_is_poissonian() {
        let alpha = Complex64::new(1.2, -0.4);
        let st = GaussianState::new(
            Vector2::new(alpha.re * 2f64.sqrt(), alpha.im * 2f64.sqrt()),
            Matrix2::identity() * 0.5,
        );
        let e = MomentEngine::new(st);
        let n = NormalPoly::number();
        let mean = e.expect(&n).unwrap().re;
        let var = e.expect(&n.mul(&n)).unwrap().re - mean * mean;
        assert!((mean - alpha.norm_sqr()).abs() < 1e-13);
        assert!((var - alpha.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn quadrature_fourth_moment() {
        let st = GaussianState::new(Vector2::zeros(), Matrix2::new(1.3, 0.4, 0.4, 0.9));
        let e = MomentEngine::new(st);
        let x = b().add(&bdag());
        let x2 = e.expect(&x.mul(&x)).unwrap().re;
        let x4 = e.expect(&x.mul(&x).mul(&x).mul(&x)).unwrap().re;
        // X = √2 q, so ⟨X²⟩ = 2 C11
        assert!((x2 - 2.0 * 1.3).abs() < 1e-13);
        assert!((x4 - 3.0 * x2 * x2).abs() < 1e-12);
    }

    #[test]
    fn squeezed_vacuum_number_variance() {
        let r = 0.6f64;
        let st = GaussianState::new(
            Vector2::zeros(),
            Matrix2::new((2.0 * r).exp(), 0.0, 0.0, (-2.0 * r).exp()) * 0.5,
        );
        let e = MomentEngine::new(st);
        let n = NormalPoly::number();
        let mean = e.expect(&n).unwrap().re;
        let var = e.expect(&n.mul(&n)).unwrap().re - mean * mean;
        assert!((mean - r.sinh().powi(2)).abs() < 1e-13);
        assert!((var - 0.5 * (2.0 * r).sinh().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn order_limit() {
        let e = MomentEngine::with_max_order(GaussianState::vacuum(), 4);
        let n = NormalPoly::number();
        assert!(e.expect(&n.mul(&n)).is_ok());
        assert!(matches!(
            e.expect(&n.mul(&n).mul(&n)),
            Err(Error::Order {
                required: 6,
                max_order: 4
            })
        ));
    }

    #[test]
    fn adjoint_of_number_is_itself() {
        let poly = NormalPoly::monomial(2, 1, Complex64::new(0.3, 0.2)).add(&NormalPoly::number());
        assert_eq!(poly.adjoint().adjoint(), poly);
        assert_eq!(NormalPoly::number().adjoint(), NormalPoly::number());
    }
}
