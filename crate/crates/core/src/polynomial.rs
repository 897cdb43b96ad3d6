//! Sparse multivariate polynomials keyed by multi-index.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Exponent vector `(n_1, ..., n_D)` of a monomial `x_1^{n_1} ... x_D^{n_D}`.
///
/// Ordered graded-lexicographically: lower total degree first; within one
/// degree, larger leading exponents first, so `x1 < x2` and
/// `x1^2 < x1*x2 < x2^2`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MultiIndex(Vec<u32>);

impl MultiIndex {
    pub fn new(exponents: Vec<u32>) -> Self {
        MultiIndex(exponents)
    }

    /// The zero multi-index (the constant monomial) over `dim` variables.
    pub fn zero(dim: usize) -> Self {
        MultiIndex(vec![0; dim])
    }

    /// The linear monomial `x_d` (zero-based `d`).
    pub fn unit(dim: usize, d: usize) -> Self {
        let mut e = vec![0; dim];
        e[d] = 1;
        MultiIndex(e)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn is_constant(&self) -> bool {
        self.0.iter().all(|&n| n == 0)
    }

    /// Componentwise sum, i.e. the index of the product monomial.
    pub fn plus(&self, other: &MultiIndex) -> MultiIndex {
        debug_assert_eq!(self.dim(), other.dim());
        MultiIndex(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Evaluates the monomial at `x`.
    pub fn eval<T: Real>(&self, x: &[T]) -> T {
        self.0
            .iter()
            .zip(x)
            .filter(|(&n, _)| n > 0)
            .fold(T::one(), |acc, (&n, &xi)| acc * xi.powi(n as i32))
    }

    /// `Π n_d!`, the norm of the monomial under the factorial dual pairing.
    pub fn factorial_product(&self) -> f64 {
        self.0
            .iter()
            .map(|&n| (1..=n).map(f64::from).product::<f64>())
            .product()
    }

    /// Human-readable label such as `x1^2*x3`, with `1` for the constant.
    pub fn label(&self, var: &str) -> String {
        if self.is_constant() {
            return "1".to_string();
        }
        let parts: Vec<String> = self
            .0
            .iter()
            .enumerate()
            .filter(|(_, &n)| n > 0)
            .map(|(d, &n)| {
                if n == 1 {
                    format!("{var}{}", d + 1)
                } else {
                    format!("{var}{}^{n}", d + 1)
                }
            })
            .collect();
        parts.join("*")
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| other.0.cmp(&self.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.label("x"))
    }
}

/// Multivariate polynomial stored as a sparse map from multi-index to
/// coefficient. Zero coefficients are never stored.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiIndexPolynomial<T> {
    dim: usize,
    terms: BTreeMap<MultiIndex, T>,
}

impl<T: Real> MultiIndexPolynomial<T> {
    pub fn zero(dim: usize) -> Self {
        assert!(dim > 0, "polynomial dimension must be positive");
        MultiIndexPolynomial {
            dim,
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(dim: usize, c: T) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(MultiIndex::zero(dim), c);
        p
    }

    /// The coordinate function `x_d` (zero-based).
    pub fn variable(dim: usize, d: usize) -> Self {
        let mut p = Self::zero(dim);
        p.add_term(MultiIndex::unit(dim, d), T::one());
        p
    }

    pub fn monomial(index: MultiIndex, coeff: T) -> Self {
        let mut p = Self::zero(index.dim());
        p.add_term(index, coeff);
        p
    }

    /// Builds a polynomial from `(exponents, coefficient)` pairs; repeated
    /// indices accumulate.
    pub fn from_terms<I, E>(dim: usize, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (E, T)>,
        E: Into<Vec<u32>>,
    {
        if dim == 0 {
            return Err(Error::InvalidArgument("polynomial dimension must be positive".into()));
        }
        let mut p = Self::zero(dim);
        for (e, c) in terms {
            let e = e.into();
            if e.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: e.len(),
                    context: "multi-index length",
                });
            }
            p.add_term(MultiIndex(e), c);
        }
        Ok(p)
    }

    fn add_term(&mut self, index: MultiIndex, c: T) {
        debug_assert_eq!(index.dim(), self.dim);
        let entry = self.terms.entry(index);
        match entry {
            std::collections::btree_map::Entry::Vacant(v) => {
                if c != T::zero() {
                    v.insert(c);
                }
            }
            std::collections::btree_map::Entry::Occupied(mut o) => {
                let s = *o.get() + c;
                if s == T::zero() {
                    o.remove();
                } else {
                    *o.get_mut() = s;
                }
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Terms in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, T)> + '_ {
        self.terms.iter().map(|(k, &v)| (k, v))
    }

    pub fn coefficient(&self, index: &MultiIndex) -> T {
        self.terms.get(index).copied().unwrap_or_else(T::zero)
    }

    /// Maximum total degree over stored terms; zero for the zero polynomial.
    pub fn degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    pub fn eval(&self, x: &[T]) -> Result<T> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: x.len(),
                context: "polynomial evaluation point",
            });
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: &[T]) -> T {
        self.terms
            .iter()
            .fold(T::zero(), |acc, (k, &c)| acc + c * k.eval(x))
    }

    pub fn scale(&self, s: T) -> Self {
        let mut out = Self::zero(self.dim);
        for (k, &c) in &self.terms {
            out.add_term(k.clone(), c * s);
        }
        out
    }

    /// Partial derivative with respect to `x_d` (zero-based).
    pub fn derivative(&self, d: usize) -> Self {
        assert!(d < self.dim, "derivative index out of range");
        let mut out = Self::zero(self.dim);
        for (k, &c) in &self.terms {
            let n = k.0[d];
            if n == 0 {
                continue;
            }
            let mut e = k.0.clone();
            e[d] -= 1;
            out.add_term(MultiIndex(e), c * T::from_count(n as usize));
        }
        out
    }

    /// Drops every term whose total degree exceeds `max_degree`.
    pub fn truncated(&self, max_degree: u32) -> Self {
        MultiIndexPolynomial {
            dim: self.dim,
            terms: self
                .terms
                .iter()
                .filter(|(k, _)| k.degree() <= max_degree)
                .map(|(k, &c)| (k.clone(), c))
                .collect(),
        }
    }
}

impl<T: Real> Add for &MultiIndexPolynomial<T> {
    type Output = MultiIndexPolynomial<T>;

    fn add(self, rhs: Self) -> Self::Output {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        let mut out = self.clone();
        for (k, &c) in &rhs.terms {
            out.add_term(k.clone(), c);
        }
        out
    }
}

impl<T: Real> Sub for &MultiIndexPolynomial<T> {
    type Output = MultiIndexPolynomial<T>;

    fn sub(self, rhs: Self) -> Self::Output {
        self + &(-rhs)
    }
}

impl<T: Real> Neg for &MultiIndexPolynomial<T> {
    type Output = MultiIndexPolynomial<T>;

    fn neg(self) -> Self::Output {
        self.scale(-T::one())
    }
}

impl<T: Real> Mul for &MultiIndexPolynomial<T> {
    type Output = MultiIndexPolynomial<T>;

    fn mul(self, rhs: Self) -> Self::Output {
        assert_eq!(self.dim, rhs.dim, "polynomial dimensions differ");
        let mut out = MultiIndexPolynomial::zero(self.dim);
        for (a, &ca) in &self.terms {
            for (b, &cb) in &rhs.terms {
                out.add_term(a.plus(b), ca * cb);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mi(e: &[u32]) -> MultiIndex {
        MultiIndex::new(e.to_vec())
    }

    #[test]
    fn graded_lex_order_matches_listing() {
        let mut v = vec![mi(&[0, 2]), mi(&[1, 0]), mi(&[0, 0]), mi(&[1, 1]), mi(&[0, 1]), mi(&[2, 0])];
        v.sort();
        let labels: Vec<String> = v.iter().map(|m| m.to_string()).collect();
        assert_eq!(labels, ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2"]);
    }

    #[test]
    fn single_term_evaluation() {
        let p = MultiIndexPolynomial::from_terms(1, [(vec![2], 3.0)]).unwrap();
        assert_eq!(p.eval(&[2.0]).unwrap(), 12.0);
    }

    #[test]
    fn zero_coefficients_are_not_stored() {
        let p = MultiIndexPolynomial::from_terms(2, [(vec![1, 0], 1.0), (vec![1, 0], -1.0), (vec![0, 1], 0.0)])
            .unwrap();
        assert!(p.is_zero());
        assert_eq!(p.degree(), 0);
    }

    #[test]
    fn wrong_index_length_rejected() {
        let r = MultiIndexPolynomial::from_terms(2, [(vec![1, 0, 0], 1.0)]);
        assert!(matches!(r, Err(Error::DimensionMismatch { .. })));
        let p = MultiIndexPolynomial::<f64>::variable(2, 0);
        assert!(p.eval(&[1.0]).is_err());
    }

    #[test]
    fn derivative_of_cubic() {
        // d/dx1 (x1^3 x2 + 2 x2) = 3 x1^2 x2
        let p = MultiIndexPolynomial::from_terms(2, [(vec![3, 1], 1.0), (vec![0, 1], 2.0)]).unwrap();
        let d = p.derivative(0);
        assert_eq!(d.len(), 1);
        assert_eq!(d.coefficient(&mi(&[2, 1])), 3.0);
    }

    #[test]
    fn truncation_drops_high_degree() {
        let p = MultiIndexPolynomial::from_terms(2, [(vec![3, 1], 1.0), (vec![0, 1], 2.0)]).unwrap();
        let t = p.truncated(3);
        assert_eq!(t.len(), 1);
        assert_eq!(t.degree(), 1);
    }

    #[test]
    fn factorial_product_values() {
        assert_eq!(mi(&[2, 1]).factorial_product(), 2.0);
        assert_eq!(mi(&[1, 0]).factorial_product(), 1.0);
        assert_eq!(mi(&[3]).factorial_product(), 6.0);
    }

    fn small_poly() -> impl Strategy<Value = MultiIndexPolynomial<f64>> {
        prop::collection::vec(((0u32..4, 0u32..4), -4i32..=4), 0..6).prop_map(|terms| {
            MultiIndexPolynomial::from_terms(
                2,
                terms.into_iter().map(|((a, b), c)| (vec![a, b], f64::from(c) * 0.25)),
            )
            .unwrap()
        })
    }

    proptest! {
        #[test]
        fn sum_and_scale_evaluate_pointwise(
            p in small_poly(),
            q in small_poly(),
            xs in prop::collection::vec((-2.0f64..2.0, -2.0f64..2.0), 100),
        ) {
            let s = &p + &q;
            let h = p.scale(0.5);
            for (a, b) in xs {
                let x = [a, b];
                let lhs = s.eval(&x).unwrap();
                let rhs = p.eval(&x).unwrap() + q.eval(&x).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()));
                prop_assert_eq!(h.eval(&x).unwrap(), 0.5 * p.eval(&x).unwrap());
            }
        }

        #[test]
        fn product_evaluates_pointwise(p in small_poly(), q in small_poly(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let x = [a, b];
            let lhs = (&p * &q).eval(&x).unwrap();
            let rhs = p.eval(&x).unwrap() * q.eval(&x).unwrap();
            prop_assert!((lhs - rhs).abs() <= 1e-9 * (1.0 + rhs.abs()));
        }
    }
}
