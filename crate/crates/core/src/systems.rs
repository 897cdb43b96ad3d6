//! Polynomial-drift SDE models with constant additive diffusion `σ·I`.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::polynomial::MultiIndexPolynomial;
use crate::scalar::Real;

/// `dX = a(X) dt + σ dW` with polynomial drift `a` and a common noise
/// amplitude on every coordinate.
#[derive(Clone, Debug, PartialEq)]
pub struct SdeSystem<T> {
    name: String,
    drift: Vec<MultiIndexPolynomial<T>>,
    sigma: T,
    params: BTreeMap<String, f64>,
}

impl<T: Real> SdeSystem<T> {
    pub fn new(
        name: impl Into<String>,
        drift: Vec<MultiIndexPolynomial<T>>,
        sigma: T,
        params: BTreeMap<String, f64>,
    ) -> Result<Self> {
        let dim = drift.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("system needs at least one drift component".into()));
        }
        if let Some(p) = drift.iter().find(|p| p.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: p.dim(),
                context: "drift component dimension",
            });
        }
        if !(sigma >= T::zero()) || !sigma.is_finite() {
            return Err(Error::InvalidArgument(format!("sigma must be finite and non-negative, got {sigma}")));
        }
        Ok(SdeSystem {
            name: name.into(),
            drift,
            sigma,
            params,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn drift(&self) -> &[MultiIndexPolynomial<T>] {
        &self.drift
    }

    pub fn sigma(&self) -> T {
        self.sigma
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// Same drift with a different noise amplitude.
    pub fn with_sigma(&self, sigma: T) -> Result<Self> {
        Self::new(self.name.clone(), self.drift.clone(), sigma, self.params.clone())
    }

    /// Maximum total degree over all drift components.
    pub fn drift_degree(&self) -> u32 {
        self.drift.iter().map(MultiIndexPolynomial::degree).max().unwrap_or(0)
    }

    pub fn eval_drift(&self, x: &[T]) -> Result<Vec<T>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
                context: "drift evaluation point",
            });
        }
        Ok(self.drift.iter().map(|p| p.eval_unchecked(x)).collect())
    }

    pub(crate) fn eval_drift_into(&self, x: &[T], out: &mut [T]) {
        for (o, p) in out.iter_mut().zip(&self.drift) {
            *o = p.eval_unchecked(x);
        }
    }
}

fn poly<T: Real>(dim: usize, terms: &[(&[u32], f64)]) -> MultiIndexPolynomial<T> {
    MultiIndexPolynomial::from_terms(dim, terms.iter().map(|(e, c)| (e.to_vec(), T::lit(*c))))
        .expect("static term table has the right arity")
}

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

/// Noisy van der Pol oscillator:
/// `dX1 = X2 dt + σ dW1`, `dX2 = (μ(1 − X1²)X2 − X1) dt + σ dW2`.
pub fn make_van_der_pol<T: Real>(mu: f64, sigma: T) -> Result<SdeSystem<T>> {
    let drift = vec![
        poly(2, &[(&[0, 1], 1.0)]),
        poly(2, &[(&[0, 1], mu), (&[2, 1], -mu), (&[1, 0], -1.0)]),
    ];
    SdeSystem::new("van_der_pol", drift, sigma, params(&[("mu", mu)]))
}

/// Noisy Lorenz system with parameters `ν`, `ρ`, `β`.
pub fn make_lorenz<T: Real>(nu: f64, rho: f64, beta: f64, sigma: T) -> Result<SdeSystem<T>> {
    let drift = vec![
        poly(3, &[(&[0, 1, 0], nu), (&[1, 0, 0], -nu)]),
        poly(3, &[(&[1, 0, 0], rho), (&[1, 0, 1], -1.0), (&[0, 1, 0], -1.0)]),
        poly(3, &[(&[1, 1, 0], 1.0), (&[0, 0, 1], -beta)]),
    ];
    SdeSystem::new("lorenz", drift, sigma, params(&[("nu", nu), ("rho", rho), ("beta", beta)]))
}

/// Van der Pol with the restoring term `−X1` replaced by `−X1^h` for odd
/// `h ∈ {1, 3, 5}`.
pub fn make_modified_vdp<T: Real>(mu: f64, h_degree: u32, sigma: T) -> Result<SdeSystem<T>> {
    if ![1, 3, 5].contains(&h_degree) {
        return Err(Error::InvalidArgument(format!(
            "restoring-term degree must be 1, 3 or 5, got {h_degree}"
        )));
    }
    if h_degree == 1 {
        return make_van_der_pol(mu, sigma);
    }
    let drift = vec![
        poly(2, &[(&[0, 1], 1.0)]),
        poly(2, &[(&[0, 1], mu), (&[2, 1], -mu), (&[h_degree, 0], -1.0)]),
    ];
    SdeSystem::new(
        "modified_vdp",
        drift,
        sigma,
        params(&[("mu", mu), ("h_degree", f64::from(h_degree))]),
    )
}

/// One-dimensional Ornstein–Uhlenbeck process `dX = −θX dt + σ dW`.
pub fn make_ornstein_uhlenbeck<T: Real>(theta: f64, sigma: T) -> Result<SdeSystem<T>> {
    SdeSystem::new(
        "ornstein_uhlenbeck",
        vec![poly(1, &[(&[1], -theta)])],
        sigma,
        params(&[("theta", theta)]),
    )
}

/// Linear system `dx = Λx dt + σ dW`.
pub fn make_linear<T: Real>(lambda: &nalgebra::DMatrix<T>, sigma: T) -> Result<SdeSystem<T>> {
    if !lambda.is_square() || lambda.nrows() == 0 {
        return Err(Error::InvalidArgument("linear system matrix must be square and non-empty".into()));
    }
    let n = lambda.nrows();
    let drift = (0..n)
        .map(|i| {
            MultiIndexPolynomial::from_terms(
                n,
                (0..n).map(|j| {
                    let mut e = vec![0u32; n];
                    e[j] = 1;
                    (e, lambda[(i, j)])
                }),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    SdeSystem::new("linear", drift, sigma, BTreeMap::new())
}
